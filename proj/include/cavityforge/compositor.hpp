#pragma once

#include "cavityforge/autolabel.hpp"
#include "cavityforge/boxes.hpp"
#include "cavityforge/detector.hpp"
#include "cavityforge/grid.hpp"
#include "cavityforge/lut.hpp"
#include "cavityforge/patch.hpp"
#include "cavityforge/raster.hpp"
#include "cavityforge/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cavityforge::compose {

/// Clean micrograph used as the compositing canvas.
struct BackgroundImage {
    io::RasterImage raster;
    double pixel_scale = 0.09;  ///< nm per pixel
    std::string source_id;

    int width() const noexcept { return raster.pixels.width(); }
    int height() const noexcept { return raster.pixels.height(); }
};

/// Smooth textured stand-in for a clean micrograph (tests and demos only):
/// low-pass filtered noise around `mean_level` with relative spread
/// `texture`, plus a gentle linear gradient. Deterministic per seed.
BackgroundImage synthetic_background(int width, int height, double pixel_scale, int bit_depth,
                                     std::uint64_t seed, double mean_level = 0.45, double texture = 0.04);

struct BackgroundLimits {
    double min_pixel_scale = 0.079;
    double max_pixel_scale = 0.11;
    int min_side = 1024;
    int max_side = 4096;

    /// Throws DomainError naming the violated bound.
    void check(const BackgroundImage& bg) const;

    bool operator==(const BackgroundLimits&) const = default;
};

/// Feature radius distribution. Log-normal by default; a histogram (bin edges
/// plus weights, uniform within a bin) replaces it when `edges_nm` is set.
/// Draws outside [min_nm, max_nm] are rejected and redrawn.
struct SizeDistribution {
    double median_nm = 8.0;
    double log_sigma = 0.35;
    double min_nm = 1.0;
    double max_nm = 50.0;
    std::vector<double> edges_nm;
    std::vector<double> weights;

    void validate() const;
    double sample(Engine& eng) const;

    bool operator==(const SizeDistribution&) const = default;
};

/// Per-feature defocus: uniform within +-jitter_fraction of the image base.
struct DefocusDistribution {
    double base_um = -20.0;
    double jitter_fraction = 0.1;

    void validate() const;
    double sample(Engine& eng) const;

    bool operator==(const DefocusDistribution&) const = default;
};

struct PlanOptions {
    int target_count = 40;
    double footprint_rho = 1.5;   ///< box half-side in extent units (cavity radii by default), before the margin
    int margin_px = 2;
    int max_attempts = 1000;      ///< per feature
    double max_area_fraction = 0.4;

    bool operator==(const PlanOptions&) const = default;
};

struct PlanEntry {
    int id = 0;
    int cx = 0;
    int cy = 0;
    PixelBox box;                 ///< inclusive, image coordinates
    double radius_nm = 0.0;
    double defocus_um = 0.0;
    std::uint64_t seed = 0;       ///< root of this feature's substreams
};

struct PlacementPlan {
    std::vector<PlanEntry> entries;
    int target_count = 0;
    int margin_px = 0;
    int unplaced = 0;             ///< features that exhausted their attempts
};

/// Half-side in pixels of the placement box for a cavity of the given radius.
/// `extent_rho` is the feature's visible extent in cavity radii.
int footprint_half_side(double radius_nm, double pixel_scale, const PlanOptions& opt, double extent_rho = 1.0);

/// Visible extent in cavity radii for a drawn (radius, defocus), e.g. the
/// first-fringe position of the matching profile.
using ExtentFn = std::function<double(double radius_nm, double defocus_um)>;

/// Draws (R, Z) per feature and places boxes by rejection sampling. Boxes
/// dilated by margin_px never intersect and always lie inside the image.
/// Throws DomainError when the drawn boxes would cover more than
/// max_area_fraction of the image.
PlacementPlan sample_plan(const BackgroundImage& bg, const SizeDistribution& sizes,
                          const DefocusDistribution& defocus, const PlanOptions& opt, std::uint64_t seed,
                          const ExtentFn& extent = {});

struct NormalizeOptions {
    int ring_px = 8;              ///< width of the ring around the box used for the local mean
};

struct NormalizedPatch {
    Grid<double> raster;          ///< background intensity units, clamped to the bit depth
    double local_mean = 0.0;
    bool used_global_mean = false;
    bool clamped = false;
};

/// Scales a ratio patch (already cropped to `box`) by the mean of the ring
/// `box.dilated(ring) \ box`, then clamps to [0, max]. A flat ring (zero
/// variance) falls back to the global image mean.
NormalizedPatch normalize_patch(const Grid<double>& ratio, const BackgroundImage& bg, const PixelBox& box,
                                const NormalizeOptions& opt = {});

struct ComposeOptions {
    patch::SizeClassTable size_classes;
    patch::WarpOptions warp;
    label::LabelOptions label;
    detector::DetectorParams detector;
    NormalizeOptions normalize;
    double blend_tolerance = 1e-6;
    double max_drop_fraction = 0.1;
    bool keep_masks = true;
};

/// Provenance of one blended feature.
struct FeatureRecord {
    int plan_id = 0;
    double radius_nm = 0.0;
    double defocus_um = 0.0;
    double lut_radius_nm = 0.0;   ///< grid key of the profile actually used
    double lut_defocus_um = 0.0;
    std::uint64_t seed = 0;
    std::vector<patch::WarpHarmonic> warp;
    label::LabelMethod method = label::LabelMethod::Watershed;
    double fringe_radius_px = 0.0;
    PixelBox label_box;           ///< image coordinates
    Mask mask;                    ///< label mask cropped to label_box (when kept)
};

struct LabeledImage {
    BackgroundImage image;
    std::vector<io::BoxRecord> labels;
    std::vector<FeatureRecord> features;
    int planned = 0;
    int dropped = 0;
    std::vector<std::string> warnings;

    /// Union of the kept label masks as a full-size image mask.
    Mask label_mask() const;
};

/// Runs lookup, rotate, warp, label, MTF, shot noise, normalization and
/// Poisson blending for every plan entry, in plan order. Features whose
/// patch, warp, label or blend step fails are dropped and counted; throws
/// CompositionError when more than max_drop_fraction of the plan drops.
LabeledImage compose_image(const BackgroundImage& bg, const PlacementPlan& plan, const physics::ProfileLut& lut,
                           const ComposeOptions& opt);

}  // namespace cavityforge::compose
