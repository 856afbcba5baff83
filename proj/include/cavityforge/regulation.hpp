#pragma once

#include "cavityforge/boxes.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cavityforge::regulation {

enum class PresetName { HighInclusivity, Standard, LowInclusivity, Custom };

std::string to_string(PresetName name);

struct ThresholdPreset {
    PresetName name = PresetName::Standard;
    double individual = 0.4;
    double image = 0.7;

    static ThresholdPreset high_inclusivity() { return {PresetName::HighInclusivity, 0.45, 0.65}; }
    static ThresholdPreset standard() { return {PresetName::Standard, 0.4, 0.7}; }
    static ThresholdPreset low_inclusivity() { return {PresetName::LowInclusivity, 0.35, 0.75}; }
    static ThresholdPreset custom(double individual, double image) { return {PresetName::Custom, individual, image}; }

    /// Warning text when the pair is not 0 <= individual <= image <= 1.
    std::optional<std::string> ordering_warning() const;

    bool operator==(const ThresholdPreset&) const = default;
};

/// "high", "standard" or "low" (case-insensitive). ConfigError listing the valid names otherwise.
ThresholdPreset preset_by_name(std::string_view name);

/// What an image with no surviving predictions does.
enum class ZeroPredictionPolicy { Fail, PassThrough };

/// Comparisons are inclusive; scores within this distance below a threshold
/// count as reaching it, so values such as (0.5 + 0.9) / 2 meet 0.7.
inline constexpr double kThresholdSlack = 1e-12;

/// Size-weighted mean confidence sum(w h c) / sum(w h); 0 for an empty list.
/// When every box has zero area the plain mean of the confidences is used.
/// Throws DomainError if a record has no confidence.
double image_confidence(std::span<const io::BoxRecord> predictions);

struct FilterDecision {
    std::string image_id;
    std::vector<io::BoxRecord> surviving;
    std::size_t total_predictions = 0;
    double image_confidence = 0.0;
    bool passed = false;
    ThresholdPreset preset;
};

/// Drops predictions below the individual threshold, scores the survivors and
/// compares the score with the image threshold.
FilterDecision apply_filter(std::string image_id, std::span<const io::BoxRecord> predictions,
                            const ThresholdPreset& preset,
                            ZeroPredictionPolicy policy = ZeroPredictionPolicy::Fail);

struct FilterReport {
    std::size_t total = 0;
    std::size_t failed = 0;
    double filtering_rate = 0.0;   ///< failed / total
    std::vector<FilterDecision> rows;

    /// Rate rounded to a whole percent, e.g. "25%".
    std::string rate_display() const;
};

/// Throws DomainError for an empty list.
FilterReport filtering_report(std::span<const FilterDecision> decisions);

/// CSV with columns image_id,predictions,surviving,image_confidence,passed.
std::string decisions_csv(const FilterReport& report);

}  // namespace cavityforge::regulation
