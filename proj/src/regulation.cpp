#include "cavityforge/regulation.hpp"

#include "cavityforge/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace cavityforge::regulation {

std::string to_string(PresetName name) {
    switch (name) {
        case PresetName::HighInclusivity: return "high";
        case PresetName::Standard: return "standard";
        case PresetName::LowInclusivity: return "low";
        case PresetName::Custom: return "custom";
    }
    return "custom";
}

std::optional<std::string> ThresholdPreset::ordering_warning() const {
    if (individual >= 0.0 && individual <= image && image <= 1.0) return std::nullopt;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "thresholds individual=%g image=%g do not satisfy 0 <= individual <= image <= 1", individual,
                  image);
    return std::string(buf);
}

ThresholdPreset preset_by_name(std::string_view name) {
    std::string n(name);
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == "high") return ThresholdPreset::high_inclusivity();
    if (n == "standard") return ThresholdPreset::standard();
    if (n == "low") return ThresholdPreset::low_inclusivity();
    throw ConfigError("unknown preset '" + std::string(name) + "'; valid presets: high, standard, low");
}

double image_confidence(std::span<const io::BoxRecord> predictions) {
    double num = 0.0;
    double den = 0.0;
    double plain = 0.0;
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& p : predictions) {
        if (!p.confidence) throw DomainError("image confidence needs prediction records with a confidence");
        const double area = p.w * p.h;
        num += area * *p.confidence;
        den += area;
        plain += *p.confidence;
        lo = std::min(lo, *p.confidence);
        hi = std::max(hi, *p.confidence);
    }
    if (predictions.empty()) return 0.0;
    // A weighted mean lies between its extremes; the clamp only removes
    // rounding excursions, so equal confidences come back exactly.
    const double score = den > 0.0 ? num / den : plain / static_cast<double>(predictions.size());
    return std::clamp(score, lo, hi);
}

FilterDecision apply_filter(std::string image_id, std::span<const io::BoxRecord> predictions,
                            const ThresholdPreset& preset, ZeroPredictionPolicy policy) {
    FilterDecision d;
    d.image_id = std::move(image_id);
    d.preset = preset;
    d.total_predictions = predictions.size();
    for (const auto& p : predictions) {
        if (!p.confidence) throw DomainError("image '" + d.image_id + "': record without confidence");
        if (*p.confidence >= preset.individual - kThresholdSlack) d.surviving.push_back(p);
    }
    d.image_confidence = image_confidence(d.surviving);
    if (d.surviving.empty()) {
        d.passed = policy == ZeroPredictionPolicy::PassThrough;
    } else {
        d.passed = d.image_confidence >= preset.image - kThresholdSlack;
    }
    return d;
}

std::string FilterReport::rate_display() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f%%", std::round(100.0 * filtering_rate));
    return buf;
}

FilterReport filtering_report(std::span<const FilterDecision> decisions) {
    if (decisions.empty()) throw DomainError("filtering report needs at least one image");
    FilterReport r;
    r.rows.assign(decisions.begin(), decisions.end());
    r.total = decisions.size();
    r.failed = static_cast<std::size_t>(
        std::count_if(decisions.begin(), decisions.end(), [](const FilterDecision& d) { return !d.passed; }));
    r.filtering_rate = static_cast<double>(r.failed) / static_cast<double>(r.total);
    return r;
}

std::string decisions_csv(const FilterReport& report) {
    std::string out = "image_id,predictions,surviving,image_confidence,passed\n";
    char buf[64];
    for (const auto& d : report.rows) {
        std::snprintf(buf, sizeof buf, ",%zu,%zu,%.6f,%d\n", d.total_predictions, d.surviving.size(),
                      d.image_confidence, d.passed ? 1 : 0);
        out += d.image_id;
        out += buf;
    }
    return out;
}

}  // namespace cavityforge::regulation
