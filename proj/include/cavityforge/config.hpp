#pragma once

#include "cavityforge/autolabel.hpp"
#include "cavityforge/compositor.hpp"
#include "cavityforge/detector.hpp"
#include "cavityforge/lut.hpp"
#include "cavityforge/patch.hpp"
#include "cavityforge/physics.hpp"
#include "cavityforge/regulation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cavityforge::config {

struct SizeClassConfig {
    double small_upper_nm = 5.0;
    double medium_upper_nm = 20.0;
    double small_amplitude = 0.03;
    double medium_amplitude = 0.07;
    double large_amplitude = 0.12;

    patch::SizeClassTable table() const;

    bool operator==(const SizeClassConfig&) const = default;
};

struct GenerationConfig {
    int images = 5;
    std::string split = "train";
    std::string image_format = "pgm";           ///< "pgm" or "png"
    bool write_masks = true;
    double default_pixel_scale = 0.09;          ///< nm/px when a background has no listed scale
    double base_defocus_min_um = -22.0;         ///< per-image base defocus drawn uniformly from [min, max]
    double base_defocus_max_um = -18.0;
    double defocus_jitter = 0.1;
    compose::SizeDistribution sizes;
    compose::PlanOptions plan;
    compose::BackgroundLimits background_limits;
    int normalization_ring_px = 8;
    double max_drop_fraction = 0.1;
    double blend_tolerance = 1e-6;

    bool operator==(const GenerationConfig&) const = default;
};

struct RegulationConfig {
    regulation::ThresholdPreset preset = regulation::ThresholdPreset::standard();
    regulation::ZeroPredictionPolicy zero_predictions = regulation::ZeroPredictionPolicy::Fail;

    bool operator==(const RegulationConfig&) const = default;
};

struct EvaluationConfig {
    double thickness_nm = 100.0;
    std::string ground_truth = "auto";          ///< "auto", "mask" or "box"
    std::vector<double> sweep_individual{0.35, 0.4, 0.45};
    std::vector<double> sweep_image{0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8};

    bool operator==(const EvaluationConfig&) const = default;
};

/// Fully resolved run configuration (defaults applied).
struct Config {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    physics::MicroscopeParams microscope;
    physics::SimulationSettings simulation;
    physics::GridSpec lut_grid = physics::GridSpec::desk_default();
    SizeClassConfig size_classes;
    patch::FringeCheckOptions fringe;
    int warp_attempts = 16;
    label::LabelOptions label;
    detector::DetectorParams detector;
    GenerationConfig generation;
    RegulationConfig regulation;
    EvaluationConfig evaluation;

    compose::ComposeOptions compose_options() const;
    /// Runs every module's validation; ConfigError naming the key on failure.
    void validate() const;

    bool operator==(const Config&) const = default;
};

/// Parses JSON text over the defaults. Unknown keys, wrong types and invalid
/// values are ConfigErrors naming the dotted key path. The optional top-level
/// "defocus_unit" ("um", "nm" or "mm") applies to every defocus value in the
/// file; values are converted to micrometres.
Config parse_config(std::string_view json_text);
Config load_config(const std::filesystem::path& path);

/// The resolved configuration as canonical JSON (sorted keys, two-space
/// indent, defocus in micrometres). parse_config(dump_config(c)) == c.
std::string dump_config(const Config& c);

}  // namespace cavityforge::config
