#pragma once

#include "cavityforge/grid.hpp"
#include "cavityforge/patch.hpp"

#include <cstdint>

namespace cavityforge::detector {

struct DetectorParams {
    double mtf_plateau = 0.1;            ///< a in [0, 1]; 1 disables the filter
    double mtf_halfwidth_nyquist = 0.4;  ///< u_c as a fraction of Nyquist (0.5 cycles/px)
    double dqe_zero = 0.5;               ///< (0, 1]
    double dose_per_pixel = 500.0;       ///< electron counts at background intensity
    std::uint64_t rng_seed = 0;

    /// u_c in cycles per pixel.
    double halfwidth_cycles() const noexcept { return 0.5 * mtf_halfwidth_nyquist; }
    void validate() const;

    bool operator==(const DetectorParams&) const = default;
};

/// MTF(u) = a + (1 - a) / (1 + (u / u_c)^2), u in cycles per pixel.
double mtf(double u, const DetectorParams& p) noexcept;

/// Multiplies the 2D spectrum by the radial MTF (periodic boundary).
Grid<double> apply_mtf(const Grid<double>& image, const DetectorParams& p);

/// Poisson counting noise at effective dose dose_per_pixel * dqe_zero, rescaled
/// back to intensity units. Deterministic per params.rng_seed.
Grid<double> apply_shot_noise(const Grid<double>& image, const DetectorParams& p);

/// apply_shot_noise(apply_mtf(image)).
Grid<double> enhance(const Grid<double>& image, const DetectorParams& p);

patch::CavityPatch apply_mtf(const patch::CavityPatch& patch, const DetectorParams& p);
patch::CavityPatch apply_shot_noise(const patch::CavityPatch& patch, const DetectorParams& p);

}  // namespace cavityforge::detector
