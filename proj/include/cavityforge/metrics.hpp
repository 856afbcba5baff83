#pragma once

#include "cavityforge/boxes.hpp"
#include "cavityforge/grid.hpp"
#include "cavityforge/regulation.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cavityforge::metrics {

/// Union of the boxes' pixel rectangles (see io::box_to_pixels).
Mask rasterize(std::span<const io::BoxRecord> boxes, int width, int height);

struct PixelConfusion {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
    bool operator==(const PixelConfusion&) const = default;
};

/// Throws DomainError when the masks differ in size.
PixelConfusion confusion(const Mask& pred, const Mask& gt);

/// Undefined precision or recall (zero denominator) is reported as 0 and flagged.
struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
};

Prf1 prf1(const PixelConfusion& c);

struct SwellingInput {
    std::vector<double> diameters_nm;
    double area_nm2 = 0.0;
    double thickness_nm = 100.0;
};

/// Percent volume swelling 100 * V_c / (S delta - V_c) with V_c = pi/6 sum d^3.
/// DomainError for non-positive diameters, area or thickness, or when the
/// denominator is not positive.
double swelling(const SwellingInput& in);

/// d = ((w W + h H) / 2) * pixel_scale for each box.
std::vector<double> box_diameters_nm(std::span<const io::BoxRecord> boxes, int width, int height,
                                     double pixel_scale);

/// A value that may be undefined (reported as 0 with the flag set).
struct Flagged {
    double value = 0.0;
    bool undefined = false;
};

/// pred / gt; undefined when gt == 0.
Flagged normalized_swelling(double pred_percent, double gt_percent);

double mean(std::span<const double> values);

/// Coefficient of determination of pred against gt and root-mean-square error
/// (same units as the inputs). R^2 is undefined for fewer than two points or a
/// constant ground truth.
struct Agreement {
    Flagged r2;
    double rmse = 0.0;
};

Agreement agreement(std::span<const double> pred, std::span<const double> gt);

/// Mean over boxes of (w + h) / 2, in percent of the image size. Undefined for no boxes.
Flagged relative_feature_size(std::span<const io::BoxRecord> boxes);

/// Median of |a_i - b_i| over paired values; DomainError on size mismatch or empty input.
double median_abs_difference(std::span<const double> a, std::span<const double> b);

/// One image of an evaluation corpus.
struct EvalImage {
    std::string id;
    int width = 0;
    int height = 0;
    double pixel_scale = 0.09;
    double thickness_nm = 100.0;
    std::vector<io::BoxRecord> predictions;
    std::vector<io::BoxRecord> gt_boxes;
    std::optional<Mask> gt_mask;   ///< used instead of the boxes for pixel metrics when present
};

struct ImageRow {
    std::string id;
    Prf1 scores;
    double swelling_pred = 0.0;
    double swelling_gt = 0.0;
    Flagged normalized_swelling;
    double image_confidence = 0.0;
    bool passed = false;
    std::size_t predictions = 0;
    std::size_t surviving = 0;
};

struct AggregateRow {
    std::size_t images = 0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
    Flagged r2;
    double rmse = 0.0;            ///< swelling percentage points
    double filtering_rate = 0.0;
};

struct EvaluationReport {
    std::vector<ImageRow> rows;
    AggregateRow unfiltered;      ///< every image
    AggregateRow filtered;        ///< images that passed self-regulation
    regulation::ThresholdPreset preset;
    std::string gt_mode;          ///< "mask", "box" or "mixed"
};

/// Scores every image on the predictions that survive the individual
/// threshold, and aggregates with and without the image-level filter.
EvaluationReport evaluate(std::span<const EvalImage> corpus, const regulation::ThresholdPreset& preset,
                          regulation::ZeroPredictionPolicy policy = regulation::ZeroPredictionPolicy::Fail,
                          unsigned jobs = 1);

std::string report_csv(const EvaluationReport& report);
std::string aggregate_csv(const EvaluationReport& report);
std::string report_text(const EvaluationReport& report);

struct SweepRow {
    double individual = 0.0;
    double image = 0.0;
    double filtering_rate = 0.0;
    double mean_f1 = 0.0;         ///< over surviving images, NaN when none survive
    double mean_rmse = 0.0;       ///< swelling RMSE over surviving images, NaN when none survive
};

/// One row per (individual, image) pair, individual-major in the given order.
std::vector<SweepRow> threshold_sweep(std::span<const EvalImage> corpus, std::span<const double> individual,
                                      std::span<const double> image,
                                      regulation::ZeroPredictionPolicy policy = regulation::ZeroPredictionPolicy::Fail);

/// CSV with columns individual_thr,image_thr,filtering_rate,mean_F1,mean_RMSE.
std::string sweep_csv(std::span<const SweepRow> rows);

/// Box label sets from several labelers, keyed by image id.
using LabelSet = std::map<std::string, std::vector<io::BoxRecord>>;

struct ImageGeometry {
    int width = 0;
    int height = 0;
    double pixel_scale = 0.09;
    double thickness_nm = 100.0;
};

struct RoundRobin {
    std::vector<std::vector<double>> f1;        ///< f1[i][j]: set i scored against set j as ground truth
    std::vector<std::string> image_ids;
    std::vector<std::vector<double>> swelling;  ///< swelling[i][k]: labeler i on image k, percent
};

/// Pairwise mean per-image pixel F1. Images where both sets are empty count
/// as perfect agreement. Throws DomainError when the sets cover different ids
/// or an id has no geometry.
RoundRobin round_robin(std::span<const LabelSet> sets, const std::map<std::string, ImageGeometry>& geometry);

std::string round_robin_csv(const RoundRobin& rr, std::span<const std::string> names);

}  // namespace cavityforge::metrics
