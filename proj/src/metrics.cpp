#include "cavityforge/metrics.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace cavityforge::metrics {

Mask rasterize(std::span<const io::BoxRecord> boxes, int width, int height) {
    Mask m(width, height, 0);
    for (const auto& b : boxes) {
        const PixelBox px = io::box_to_pixels(b, width, height);
        for (int y = px.y0; y <= px.y1; ++y) {
            auto row = m.row(y);
            std::fill(row.begin() + px.x0, row.begin() + px.x1 + 1, std::uint8_t{1});
        }
    }
    return m;
}

PixelConfusion confusion(const Mask& pred, const Mask& gt) {
    if (pred.width() != gt.width() || pred.height() != gt.height()) {
        throw DomainError("prediction and ground-truth masks differ in size");
    }
    PixelConfusion c;
    const auto p = pred.values();
    const auto g = gt.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool a = p[i] != 0;
        const bool b = g[i] != 0;
        if (a && b) ++c.tp;
        else if (a) ++c.fp;
        else if (b) ++c.fn;
        else ++c.tn;
    }
    return c;
}

Prf1 prf1(const PixelConfusion& c) {
    Prf1 r;
    const double tp = static_cast<double>(c.tp);
    if (c.tp + c.fp == 0) r.precision_undefined = true;
    else r.precision = tp / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn == 0) r.recall_undefined = true;
    else r.recall = tp / static_cast<double>(c.tp + c.fn);
    if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double swelling(const SwellingInput& in) {
    if (!(in.area_nm2 > 0.0)) throw DomainError("image area must be positive");
    if (!(in.thickness_nm > 0.0)) throw DomainError("foil thickness must be positive");
    double cubes = 0.0;
    for (double d : in.diameters_nm) {
        if (!(d > 0.0)) throw DomainError("cavity diameters must be positive");
        cubes += d * d * d;
    }
    const double vc = std::numbers::pi / 6.0 * cubes;
    const double denom = in.area_nm2 * in.thickness_nm - vc;
    if (!(denom > 0.0)) throw DomainError("cavity volume exceeds the imaged volume");
    return 100.0 * vc / denom;
}

std::vector<double> box_diameters_nm(std::span<const io::BoxRecord> boxes, int width, int height,
                                     double pixel_scale) {
    std::vector<double> d;
    d.reserve(boxes.size());
    for (const auto& b : boxes) d.push_back(0.5 * (b.w * width + b.h * height) * pixel_scale);
    return d;
}

Flagged normalized_swelling(double pred_percent, double gt_percent) {
    if (gt_percent == 0.0) return {0.0, true};
    return {pred_percent / gt_percent, false};
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

Agreement agreement(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size()) throw DomainError("prediction and ground-truth lists differ in length");
    Agreement a;
    if (gt.empty()) {
        a.r2.undefined = true;
        return a;
    }
    const double gm = mean(gt);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        ss_res += (pred[i] - gt[i]) * (pred[i] - gt[i]);
        ss_tot += (gt[i] - gm) * (gt[i] - gm);
    }
    a.rmse = std::sqrt(ss_res / static_cast<double>(gt.size()));
    if (gt.size() < 2 || ss_tot == 0.0) a.r2.undefined = true;
    else a.r2.value = 1.0 - ss_res / ss_tot;
    return a;
}

Flagged relative_feature_size(std::span<const io::BoxRecord> boxes) {
    if (boxes.empty()) return {0.0, true};
    double s = 0.0;
    for (const auto& b : boxes) s += 0.5 * (b.w + b.h);
    return {100.0 * s / static_cast<double>(boxes.size()), false};
}

double median_abs_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw DomainError("median difference needs two equal-length non-empty lists");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

namespace {

double image_area_nm2(const EvalImage& img) {
    return static_cast<double>(img.width) * img.height * img.pixel_scale * img.pixel_scale;
}

double swelling_of(std::span<const io::BoxRecord> boxes, const EvalImage& img) {
    return swelling({box_diameters_nm(boxes, img.width, img.height, img.pixel_scale), image_area_nm2(img),
                     img.thickness_nm});
}

ImageRow score_image(const EvalImage& img, const regulation::ThresholdPreset& preset,
                     regulation::ZeroPredictionPolicy policy) {
    if (img.width <= 0 || img.height <= 0) throw DomainError("image '" + img.id + "' has no dimensions");
    const auto decision = regulation::apply_filter(img.id, img.predictions, preset, policy);
    const Mask pred = rasterize(decision.surviving, img.width, img.height);
    const Mask gt = img.gt_mask ? *img.gt_mask : rasterize(img.gt_boxes, img.width, img.height);
    ImageRow row;
    row.id = img.id;
    row.scores = prf1(confusion(pred, gt));
    row.swelling_pred = swelling_of(decision.surviving, img);
    row.swelling_gt = swelling_of(img.gt_boxes, img);
    row.normalized_swelling = normalized_swelling(row.swelling_pred, row.swelling_gt);
    row.image_confidence = decision.image_confidence;
    row.passed = decision.passed;
    row.predictions = decision.total_predictions;
    row.surviving = decision.surviving.size();
    return row;
}

AggregateRow aggregate_rows(const std::vector<const ImageRow*>& rows, std::size_t total_images) {
    AggregateRow a;
    a.images = rows.size();
    std::vector<double> p, r, f, sp, sg;
    for (const ImageRow* row : rows) {
        p.push_back(row->scores.precision);
        r.push_back(row->scores.recall);
        f.push_back(row->scores.f1);
        sp.push_back(row->swelling_pred);
        sg.push_back(row->swelling_gt);
    }
    a.mean_precision = mean(p);
    a.mean_recall = mean(r);
    a.mean_f1 = mean(f);
    const Agreement ag = agreement(sp, sg);
    a.r2 = ag.r2;
    a.rmse = ag.rmse;
    a.filtering_rate =
        total_images == 0 ? 0.0 : static_cast<double>(total_images - rows.size()) / static_cast<double>(total_images);
    return a;
}

std::string flagged(const Flagged& f) {
    if (f.undefined) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", f.value);
    return buf;
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

EvaluationReport evaluate(std::span<const EvalImage> corpus, const regulation::ThresholdPreset& preset,
                          regulation::ZeroPredictionPolicy policy, unsigned jobs) {
    EvaluationReport rep;
    rep.preset = preset;
    rep.rows.resize(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) { rep.rows[i] = score_image(corpus[i], preset, policy); });
    std::size_t masks = 0;
    for (const auto& img : corpus) masks += img.gt_mask ? 1 : 0;
    rep.gt_mode = masks == 0 ? "box" : masks == corpus.size() ? "mask" : "mixed";
    std::vector<const ImageRow*> all, passed;
    for (const auto& r : rep.rows) {
        all.push_back(&r);
        if (r.passed) passed.push_back(&r);
    }
    rep.unfiltered = aggregate_rows(all, all.size());
    rep.unfiltered.filtering_rate = 0.0;
    rep.filtered = aggregate_rows(passed, all.size());
    return rep;
}

std::string report_csv(const EvaluationReport& report) {
    std::string out =
        "image_id,precision,recall,f1,precision_undefined,recall_undefined,swelling_pred_pct,swelling_gt_pct,"
        "normalized_swelling,image_confidence,passed,predictions,surviving\n";
    for (const auto& r : report.rows) {
        out += r.id + "," + num(r.scores.precision) + "," + num(r.scores.recall) + "," + num(r.scores.f1) + "," +
               (r.scores.precision_undefined ? "1" : "0") + "," + (r.scores.recall_undefined ? "1" : "0") + "," +
               num(r.swelling_pred) + "," + num(r.swelling_gt) + "," + flagged(r.normalized_swelling) + "," +
               num(r.image_confidence) + "," + (r.passed ? "1" : "0") + "," + std::to_string(r.predictions) + "," +
               std::to_string(r.surviving) + "\n";
    }
    return out;
}

std::string aggregate_csv(const EvaluationReport& report) {
    std::string out = "subset,images,mean_precision,mean_recall,mean_f1,swelling_r2,swelling_rmse_pct,filtering_rate\n";
    const auto line = [&](const char* name, const AggregateRow& a) {
        out += std::string(name) + "," + std::to_string(a.images) + "," + num(a.mean_precision) + "," +
               num(a.mean_recall) + "," + num(a.mean_f1) + "," + flagged(a.r2) + "," + num(a.rmse) + "," +
               num(a.filtering_rate) + "\n";
    };
    line("unfiltered", report.unfiltered);
    line("filtered", report.filtered);
    return out;
}

std::string report_text(const EvaluationReport& report) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "preset %s (individual %.2f, image %.2f), ground truth from %s\n",
                  regulation::to_string(report.preset.name).c_str(), report.preset.individual, report.preset.image,
                  report.gt_mode.c_str());
    out += buf;
    out += "subset       images      P      R     F1   swelling R2   RMSE(%)  filtered\n";
    const auto line = [&](const char* name, const AggregateRow& a) {
        std::snprintf(buf, sizeof buf, "%-12s %6zu %6.3f %6.3f %6.3f %13s %9.4f %8.0f%%\n", name, a.images,
                      a.mean_precision, a.mean_recall, a.mean_f1, a.r2.undefined ? "n/a" : num(a.r2.value).c_str(),
                      a.rmse, 100.0 * a.filtering_rate);
        out += buf;
    };
    line("unfiltered", report.unfiltered);
    line("filtered", report.filtered);
    return out;
}

std::vector<SweepRow> threshold_sweep(std::span<const EvalImage> corpus, std::span<const double> individual,
                                      std::span<const double> image, regulation::ZeroPredictionPolicy policy) {
    std::vector<SweepRow> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double ind : individual) {
        // Pixel scores depend only on the individual threshold.
        std::vector<ImageRow> scored;
        scored.reserve(corpus.size());
        for (const auto& img : corpus) scored.push_back(score_image(img, regulation::ThresholdPreset::custom(ind, 0.0), policy));
        for (double thr : image) {
            SweepRow row{ind, thr, 0.0, nan, nan};
            std::vector<double> f1, sp, sg;
            std::size_t failed = 0;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const auto d = regulation::apply_filter(corpus[i].id, corpus[i].predictions,
                                                        regulation::ThresholdPreset::custom(ind, thr), policy);
                if (!d.passed) {
                    ++failed;
                    continue;
                }
                f1.push_back(scored[i].scores.f1);
                sp.push_back(scored[i].swelling_pred);
                sg.push_back(scored[i].swelling_gt);
            }
            row.filtering_rate = corpus.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(corpus.size());
            if (!f1.empty()) {
                row.mean_f1 = mean(f1);
                row.mean_rmse = agreement(sp, sg).rmse;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "individual_thr,image_thr,filtering_rate,mean_F1,mean_RMSE\n";
    for (const auto& r : rows) {
        out += num(r.individual) + "," + num(r.image) + "," + num(r.filtering_rate) + "," + num(r.mean_f1) + "," +
               num(r.mean_rmse) + "\n";
    }
    return out;
}

RoundRobin round_robin(std::span<const LabelSet> sets, const std::map<std::string, ImageGeometry>& geometry) {
    RoundRobin rr;
    const std::size_t n = sets.size();
    if (n == 0) return rr;
    for (const auto& [id, _] : sets[0]) rr.image_ids.push_back(id);
    for (std::size_t i = 1; i < n; ++i) {
        std::vector<std::string> ids;
        for (const auto& [id, _] : sets[i]) ids.push_back(id);
        if (ids != rr.image_ids) throw DomainError("label set " + std::to_string(i) + " covers different image ids");
    }
    std::vector<ImageGeometry> geo;
    for (const auto& id : rr.image_ids) {
        auto it = geometry.find(id);
        if (it == geometry.end()) throw DomainError("no image geometry for '" + id + "'");
        geo.push_back(it->second);
    }
    std::vector<std::vector<Mask>> masks(n);
    rr.swelling.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < rr.image_ids.size(); ++k) {
            const auto& boxes = sets[i].at(rr.image_ids[k]);
            const auto& g = geo[k];
            masks[i].push_back(rasterize(boxes, g.width, g.height));
            const double area = static_cast<double>(g.width) * g.height * g.pixel_scale * g.pixel_scale;
            rr.swelling[i].push_back(
                swelling({box_diameters_nm(boxes, g.width, g.height, g.pixel_scale), area, g.thickness_nm}));
        }
    }
    rr.f1.assign(n, std::vector<double>(n, 1.0));
    const double images = static_cast<double>(rr.image_ids.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double sum = 0.0;
            for (std::size_t k = 0; k < rr.image_ids.size(); ++k) {
                const auto c = confusion(masks[i][k], masks[j][k]);
                sum += (c.tp + c.fp + c.fn == 0) ? 1.0 : prf1(c).f1;
            }
            rr.f1[i][j] = images > 0 ? sum / images : 1.0;
        }
    }
    return rr;
}

std::string round_robin_csv(const RoundRobin& rr, std::span<const std::string> names) {
    std::string out = "labeler";
    for (const auto& nm : names) out += "," + nm;
    out += "\n";
    for (std::size_t i = 0; i < rr.f1.size(); ++i) {
        out += i < names.size() ? names[i] : std::to_string(i);
        for (double v : rr.f1[i]) out += "," + num(v);
        out += "\n";
    }
    return out;
}

}  // namespace cavityforge::metrics
