#pragma once

#include "cavityforge/grid.hpp"
#include "cavityforge/physics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cavityforge::patch {

enum class SizeCategory { Small, Medium, Large };

std::string to_string(SizeCategory c);

/// Half-open radius interval [lower_nm, upper_nm) and its warp budget.
struct SizeClass {
    SizeCategory category = SizeCategory::Small;
    double lower_nm = 0.0;
    double upper_nm = 0.0;            ///< +infinity for the last class
    double max_warp_amplitude = 0.0;  ///< bound on sum |a_m|, fraction of radius

    bool operator==(const SizeClass&) const = default;
};

/// Three classes partitioning [0, inf). Validated on construction.
class SizeClassTable {
public:
    /// Small [0,5) 0.03, Medium [5,20) 0.07, Large [20,inf) 0.12.
    SizeClassTable();
    /// Upper bounds of Small and Medium, and the three amplitudes.
    SizeClassTable(double small_upper_nm, double medium_upper_nm, double small_amp, double medium_amp,
                   double large_amp);

    const std::vector<SizeClass>& classes() const noexcept { return classes_; }

private:
    std::vector<SizeClass> classes_;
};

/// Returns the class whose [lower, upper) interval contains radius. DomainError for radius <= 0.
const SizeClass& classify_size(double radius_nm, const SizeClassTable& table);

struct WarpHarmonic {
    int order = 0;        ///< m
    double amplitude = 0.0;
    double phase = 0.0;

    bool operator==(const WarpHarmonic&) const = default;
};

struct CavityPatch {
    Grid<double> intensity;           ///< ratio to background; odd x odd
    double physical_radius_nm = 0.0;
    double pixel_scale = 0.0;         ///< nm per pixel
    std::vector<WarpHarmonic> warp;   ///< empty when unwarped
    double fringe_radius_px = 0.0;    ///< 0 when no fringe was found
    std::uint64_t rng_seed = 0;

    int center() const noexcept { return intensity.width() / 2; }
    /// Mean of the outermost two-pixel ring.
    double border_mean() const;
};

/// Rotates a radial profile into a square patch sampled at `pixel_scale` nm/px.
/// Side = 2 * ceil(rho_max * R / pixel_scale) + 1. TooSmallError when the
/// half-side would be below 3 px.
CavityPatch rotate_profile(const physics::ContrastProfile& profile, double pixel_scale,
                           double contrast_floor = 0.05);

struct FringeCheckOptions {
    int rays = 64;                     ///< at least 32
    double contrast_floor = 0.05;
    double success_fraction = 0.9;
    double step_px = 0.25;             ///< ray sampling step

    bool operator==(const FringeCheckOptions&) const = default;
};

struct FringeMeasurement {
    bool found = false;
    double radius_px = 0.0;                       ///< median over successful rays
    std::vector<double> angles;                   ///< radians, one per ray
    std::vector<std::optional<double>> ray_radius;
    std::vector<double> ray_min_value;            ///< intensity at the per-ray fringe
    double success_fraction = 0.0;
};

/// Bilinear sample with coordinates clamped to the patch.
double sample_bilinear(const Grid<double>& g, double x, double y) noexcept;

/// Per-ray search for the first dark band (intensity below 1 - floor) that
/// starts outside the centre; its darkest point, refined by a parabola, is the
/// ray's fringe radius.
FringeMeasurement measure_fringe(const CavityPatch& patch, const FringeCheckOptions& opt = {});

/// True iff the fringe is detected on at least success_fraction of rays.
inline bool check_fringe(const CavityPatch& patch, const FringeCheckOptions& opt = {}) {
    return measure_fringe(patch, opt).found;
}

struct WarpOptions {
    int max_attempts = 16;
    FringeCheckOptions fringe;

    bool operator==(const WarpOptions&) const = default;
};

/// Draws harmonics m = 2..4 with sum |a_m| <= max amplitude from a seeded stream.
std::vector<WarpHarmonic> draw_harmonics(double max_amplitude, std::uint64_t seed);

/// Applies r' = r (1 + sum a_m cos(m theta + phi_m)) by inverse bilinear remap.
/// All-zero amplitudes return the input unchanged.
CavityPatch apply_warp(const CavityPatch& patch, const std::vector<WarpHarmonic>& harmonics);

/// Random size-classed warp; retries with fresh substreams until the fringe
/// survives. Throws WarpError after max_attempts failures.
CavityPatch warp_patch(const CavityPatch& patch, const SizeClass& cls, std::uint64_t seed,
                       const WarpOptions& opt = {});

}  // namespace cavityforge::patch
