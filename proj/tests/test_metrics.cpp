#include "cavityforge/errors.hpp"
#include "cavityforge/metrics.hpp"
#include "cavityforge/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace cavityforge;
using namespace cavityforge::metrics;
using io::BoxRecord;

namespace {

BoxRecord label(double cx, double cy, double w, double h) { return {0, cx, cy, w, h, std::nullopt}; }
BoxRecord pred(double cx, double cy, double w, double h, double c) { return {0, cx, cy, w, h, c}; }

Mask random_mask(Engine& eng, int w, int h, double p) {
    Mask m(w, h, 0);
    for (auto& v : m.values()) v = uniform01(eng) < p;
    return m;
}

std::size_t popcount(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m.values()) n += v != 0;
    return n;
}

// Ground truth of a few separated boxes, and predictions that either match
// them with high confidence or sit elsewhere with low confidence.
EvalImage synthetic_image(Engine& eng, const std::string& id, bool corrupted) {
    EvalImage img;
    img.id = id;
    img.width = 256;
    img.height = 256;
    for (int k = 0; k < 6; ++k) {
        const double cx = 0.1 + 0.15 * k;
        const double cy = 0.2 + 0.6 * uniform01(eng);
        const double s = 0.03 + 0.03 * uniform01(eng);
        img.gt_boxes.push_back(label(cx, cy, s, s));
        if (corrupted) {
            img.predictions.push_back(pred(cx, std::fmod(cy + 0.3, 0.8) + 0.1, s, s, 0.4 + 0.15 * uniform01(eng)));
        } else {
            img.predictions.push_back(pred(cx + 0.002, cy, s, s, 0.75 + 0.2 * uniform01(eng)));
        }
    }
    return img;
}

}  // namespace

TEST(Rasterize, FullImageAndDisjointBoxes) {
    EXPECT_EQ(popcount(rasterize(std::vector{label(0.5, 0.5, 1.0, 1.0)}, 100, 100)), 10000u);
    const std::vector<BoxRecord> boxes{label(0.1, 0.1, 0.1, 0.1), label(0.5, 0.5, 0.2, 0.1), label(0.9, 0.8, 0.1, 0.2)};
    EXPECT_EQ(popcount(rasterize(boxes, 100, 100)), 100u + 200u + 200u);
}

TEST(Rasterize, OverlappingBoxesMatchPerPixelOr) {
    Engine eng(21);
    for (int t = 0; t < 100; ++t) {
        const int W = 20 + static_cast<int>(uniform01(eng) * 100);
        const int H = 20 + static_cast<int>(uniform01(eng) * 100);
        std::vector<BoxRecord> boxes;
        for (int k = 0; k < 8; ++k) {
            boxes.push_back(label(uniform01(eng), uniform01(eng), 0.4 * uniform01(eng), 0.4 * uniform01(eng)));
        }
        const Mask m = rasterize(boxes, W, H);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                bool any = false;
                for (const auto& b : boxes) {
                    // Pixel centre inside the continuous box, with half-way rounding outward.
                    const double lx = std::round((b.cx - b.w / 2) * W), hx = std::round((b.cx + b.w / 2) * W);
                    const double ly = std::round((b.cy - b.h / 2) * H), hy = std::round((b.cy + b.h / 2) * H);
                    any = any || (x >= lx && x < hx && y >= ly && y < hy);
                }
                ASSERT_EQ(m(x, y) != 0, any) << t << " " << x << "," << y;
            }
        }
    }
}

TEST(Confusion, FourByFourShiftedBlock) {
    Mask gt(4, 4, 0), p(4, 4, 0);
    for (int y = 1; y <= 2; ++y) {
        for (int x = 1; x <= 2; ++x) {
            gt(x, y) = 1;
            p(x + 1, y) = 1;
        }
    }
    const auto c = confusion(p, gt);
    EXPECT_EQ(c, (PixelConfusion{2, 10, 2, 2}));
    const auto s = prf1(c);
    EXPECT_EQ(s.precision, 0.5);
    EXPECT_EQ(s.recall, 0.5);
    EXPECT_EQ(s.f1, 0.5);
}

TEST(Confusion, IdentityAndComplement) {
    Engine eng(1);
    const Mask m = random_mask(eng, 17, 9, 0.4);
    Mask inv = m;
    for (auto& v : inv.values()) v = !v;
    const auto same = confusion(m, m);
    EXPECT_EQ(same.fp + same.fn, 0u);
    const auto opp = confusion(inv, m);
    EXPECT_EQ(opp.tp + opp.tn, 0u);
    EXPECT_THROW(confusion(Mask(3, 3, 0), Mask(3, 4, 0)), DomainError);
}

TEST(Confusion, RandomMasksMatchBruteForceScan) {
    Engine eng(1000);
    for (int t = 0; t < 1000; ++t) {
        const int w = 1 + static_cast<int>(uniform01(eng) * 32);
        const int h = 1 + static_cast<int>(uniform01(eng) * 32);
        const Mask a = random_mask(eng, w, h, uniform01(eng));
        const Mask b = random_mask(eng, w, h, uniform01(eng));
        const auto c = confusion(a, b);
        const auto o = oracle::scan_confusion(a, b);
        ASSERT_EQ(c, (PixelConfusion{o.tp, o.tn, o.fp, o.fn}));
        ASSERT_EQ(c.total(), static_cast<std::uint64_t>(w * h));
        const auto s = prf1(c);
        const double P = o.tp + o.fp ? static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp) : 0.0;
        const double R = o.tp + o.fn ? static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fn) : 0.0;
        ASSERT_EQ(s.precision, P);
        ASSERT_EQ(s.recall, R);
        ASSERT_EQ(s.f1, P + R > 0 ? 2 * P * R / (P + R) : 0.0);
        // Swapping roles exchanges precision and recall and leaves F1 fixed.
        const auto swapped = prf1(confusion(b, a));
        ASSERT_EQ(swapped.precision, s.recall);
        ASSERT_EQ(swapped.recall, s.precision);
        ASSERT_NEAR(swapped.f1, s.f1, 1e-15);
    }
}

TEST(Prf1, DegenerateCases) {
    const auto perfect = prf1({5, 3, 0, 0});
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.recall, 1.0);
    EXPECT_EQ(perfect.f1, 1.0);
    const auto miss = prf1({0, 3, 4, 2});
    EXPECT_EQ(miss.f1, 0.0);
    EXPECT_FALSE(miss.precision_undefined);
    const auto empty = prf1({0, 9, 0, 0});
    EXPECT_TRUE(empty.precision_undefined);
    EXPECT_TRUE(empty.recall_undefined);
    EXPECT_EQ(empty.f1, 0.0);
}

TEST(Swelling, HandEvaluatedCases) {
    EXPECT_EQ(swelling({{}, 1e6, 100.0}), 0.0);
    EXPECT_NEAR(swelling({{100.0}, 1e6, 100.0}), 0.52636, 1e-5);
    const std::vector<double> d{3.0, 5.0, 7.5};
    EXPECT_NEAR(swelling({d, 1e8, 100.0}), oracle::swelling_percent(d, 1e8, 100.0), 1e-15);
    const double base = swelling({d, 1e8, 100.0});
    EXPECT_NEAR(swelling({{6.0, 10.0, 15.0}, 1e8, 100.0}) / base, 8.0, 0.08);
}

TEST(Swelling, Monotonicity) {
    const std::vector<double> d{4.0, 6.0, 9.0};
    const double base = swelling({d, 1e6, 100.0});
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto bigger = d;
        bigger[i] *= 1.01;
        EXPECT_GT(swelling({bigger, 1e6, 100.0}), base);
    }
    EXPECT_LT(swelling({d, 1.01e6, 100.0}), base);
    EXPECT_LT(swelling({d, 1e6, 101.0}), base);
}

TEST(Swelling, Errors) {
    EXPECT_THROW(swelling({{0.0}, 1e6, 100.0}), DomainError);
    EXPECT_THROW(swelling({{1.0}, 0.0, 100.0}), DomainError);
    EXPECT_THROW(swelling({{1.0}, 1e6, 0.0}), DomainError);
    EXPECT_THROW(swelling({{100.0}, 1.0, 1.0}), DomainError);
}

TEST(Swelling, DiametersFromBoxes) {
    const auto d = box_diameters_nm(std::vector{label(0.5, 0.5, 0.1, 0.05)}, 200, 100, 0.5);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_DOUBLE_EQ(d[0], 0.5 * (20.0 + 5.0) * 0.5);
}

TEST(NormalizedSwelling, Ratio) {
    EXPECT_EQ(normalized_swelling(1.3, 1.3).value, 1.0);
    EXPECT_DOUBLE_EQ(normalized_swelling(0.8, 1.0).value, 0.8);
    EXPECT_TRUE(normalized_swelling(0.8, 0.0).undefined);
    const std::vector<double> a{0.9, 1.0, 0.7}, b{1.0, 0.95, 0.5};
    EXPECT_NEAR(median_abs_difference(a, b), 0.1, 1e-12);
    EXPECT_THROW(median_abs_difference(a, std::vector<double>{1.0}), DomainError);
}

TEST(Agreement, PerfectAndDegenerate) {
    const std::vector<double> g{1.0, 2.0, 3.0};
    const auto a = agreement(g, g);
    EXPECT_EQ(a.r2.value, 1.0);
    EXPECT_EQ(a.rmse, 0.0);
    const std::vector<double> flat{2.0, 2.0, 2.0};
    EXPECT_TRUE(agreement(g, flat).r2.undefined);
    EXPECT_EQ(agreement(flat, flat).rmse, 0.0);
    EXPECT_TRUE(agreement(std::vector<double>{1.0}, std::vector<double>{2.0}).r2.undefined);
}

TEST(Agreement, RandomVectorsMatchDirectFormula) {
    Engine eng(4);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(uniform01(eng) * 30);
        std::vector<double> p(n), g(n);
        for (int i = 0; i < n; ++i) {
            g[i] = 5.0 * uniform01(eng);
            p[i] = g[i] + uniform01(eng) - 0.5;
        }
        double gm = 0.0;
        for (double v : g) gm += v / n;
        double res = 0.0, tot = 0.0;
        for (int i = 0; i < n; ++i) {
            res += (p[i] - g[i]) * (p[i] - g[i]);
            tot += (g[i] - gm) * (g[i] - gm);
        }
        const auto a = agreement(p, g);
        EXPECT_NEAR(a.r2.value, 1.0 - res / tot, 1e-12);
        EXPECT_NEAR(a.rmse, std::sqrt(res / n), 1e-12);
    }
}

TEST(RelativeFeatureSize, Mean) {
    EXPECT_NEAR(relative_feature_size(std::vector{label(0.5, 0.5, 0.05, 0.05)}).value, 5.0, 1e-12);
    EXPECT_TRUE(relative_feature_size({}).undefined);
    const std::vector<BoxRecord> b{label(0.5, 0.5, 0.02, 0.02), label(0.5, 0.5, 0.098, 0.098)};
    EXPECT_NEAR(relative_feature_size(b).value, 5.9, 1e-12);
}

TEST(Evaluate, AggregatesAreMeansOverIncludedImages) {
    Engine eng(6);
    std::vector<EvalImage> corpus;
    for (int i = 0; i < 12; ++i) corpus.push_back(synthetic_image(eng, "img" + std::to_string(i), i % 4 == 0));
    const auto rep = evaluate(corpus, regulation::ThresholdPreset::standard());
    ASSERT_EQ(rep.rows.size(), 12u);
    EXPECT_EQ(rep.gt_mode, "box");
    double f_all = 0.0, f_pass = 0.0;
    std::size_t passed = 0;
    for (const auto& r : rep.rows) {
        f_all += r.scores.f1;
        if (r.passed) {
            f_pass += r.scores.f1;
            ++passed;
        }
    }
    EXPECT_EQ(passed, 9u);
    EXPECT_NEAR(rep.unfiltered.mean_f1, f_all / 12, 1e-12);
    EXPECT_NEAR(rep.filtered.mean_f1, f_pass / passed, 1e-12);
    EXPECT_EQ(rep.filtered.images, passed);
    EXPECT_DOUBLE_EQ(rep.filtered.filtering_rate, 0.25);
    EXPECT_GT(rep.filtered.mean_f1, rep.unfiltered.mean_f1);

    // Order independence.
    auto shuffled = corpus;
    std::shuffle(shuffled.begin(), shuffled.end(), eng);
    const auto rep2 = evaluate(shuffled, regulation::ThresholdPreset::standard(), regulation::ZeroPredictionPolicy::Fail, 3);
    EXPECT_NEAR(rep2.unfiltered.mean_f1, rep.unfiltered.mean_f1, 1e-12);
    EXPECT_NEAR(rep2.filtered.mean_f1, rep.filtered.mean_f1, 1e-12);
    EXPECT_NEAR(rep2.filtered.rmse, rep.filtered.rmse, 1e-12);
    EXPECT_NEAR(rep2.unfiltered.r2.value, rep.unfiltered.r2.value, 1e-12);
}

TEST(Evaluate, MaskGroundTruthIsPreferred) {
    EvalImage img;
    img.id = "m";
    img.width = 4;
    img.height = 4;
    img.gt_boxes = {label(0.5, 0.5, 0.5, 0.5)};
    img.gt_mask = Mask(4, 4, 0);
    for (int y = 1; y <= 2; ++y) {
        for (int x = 1; x <= 2; ++x) (*img.gt_mask)(x, y) = 1;
    }
    img.predictions = {pred(0.75, 0.5, 0.5, 0.5, 0.9)};  // columns 2..3, rows 1..2
    const auto rep = evaluate(std::vector{img}, regulation::ThresholdPreset::standard());
    EXPECT_EQ(rep.gt_mode, "mask");
    EXPECT_EQ(rep.rows[0].scores.f1, 0.5);
}

TEST(Evaluate, CsvAndText) {
    Engine eng(8);
    const std::vector<EvalImage> corpus{synthetic_image(eng, "a", false), synthetic_image(eng, "b", true)};
    const auto rep = evaluate(corpus, regulation::ThresholdPreset::standard());
    const auto csv = report_csv(rep);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(csv.rfind("image_id,precision,recall,f1,", 0), 0u);
    EXPECT_NE(aggregate_csv(rep).find("filtered,1,"), std::string::npos);
    EXPECT_NE(report_text(rep).find("preset standard"), std::string::npos);
}

TEST(ThresholdSweep, ReproducesFilterDecisionsAndIsMonotone) {
    Engine eng(10);
    std::vector<EvalImage> corpus;
    for (int i = 0; i < 16; ++i) corpus.push_back(synthetic_image(eng, "i" + std::to_string(i), i % 3 == 0));
    const std::vector<double> ind{0.35, 0.4, 0.45};
    const std::vector<double> img{0.5, 0.6, 0.65, 0.7, 0.75, 0.8, 0.9};
    const auto rows = threshold_sweep(corpus, ind, img);
    ASSERT_EQ(rows.size(), ind.size() * img.size());
    for (std::size_t a = 0; a < ind.size(); ++a) {
        for (std::size_t b = 0; b < img.size(); ++b) {
            const auto& r = rows[a * img.size() + b];
            EXPECT_EQ(r.individual, ind[a]);
            EXPECT_EQ(r.image, img[b]);
            const auto rep = evaluate(corpus, regulation::ThresholdPreset::custom(ind[a], img[b]));
            EXPECT_DOUBLE_EQ(r.filtering_rate, rep.filtered.filtering_rate);
            if (rep.filtered.images) EXPECT_NEAR(r.mean_f1, rep.filtered.mean_f1, 1e-12);
            if (b > 0) EXPECT_GE(r.filtering_rate, rows[a * img.size() + b - 1].filtering_rate);
        }
    }
    const auto csv = sweep_csv(rows);
    EXPECT_EQ(csv.rfind("individual_thr,image_thr,filtering_rate,mean_F1,mean_RMSE\n", 0), 0u);
}

TEST(ThresholdSweep, SurvivorsScoreAtLeastTheFullSet) {
    Engine eng(12);
    std::vector<EvalImage> corpus;
    for (int i = 0; i < 40; ++i) corpus.push_back(synthetic_image(eng, "i" + std::to_string(i), uniform01(eng) < 0.3));
    const std::vector<double> ind{0.4}, img{0.0, 0.7};
    const auto rows = threshold_sweep(corpus, ind, img, regulation::ZeroPredictionPolicy::PassThrough);
    EXPECT_EQ(rows[0].filtering_rate, 0.0);
    EXPECT_GE(rows[1].mean_f1, rows[0].mean_f1);
}

TEST(RoundRobin, IdenticalDisjointAndSymmetric) {
    const std::map<std::string, ImageGeometry> geo{{"a", {100, 100, 0.1, 100.0}}, {"b", {120, 80, 0.1, 100.0}}};
    LabelSet s1{{"a", {label(0.2, 0.2, 0.1, 0.1)}}, {"b", {label(0.5, 0.5, 0.2, 0.2)}}};
    LabelSet s2{{"a", {label(0.8, 0.8, 0.1, 0.1)}}, {"b", {label(0.1, 0.1, 0.1, 0.1)}}};
    LabelSet s3{{"a", {label(0.22, 0.2, 0.1, 0.12)}}, {"b", {label(0.5, 0.55, 0.25, 0.2)}}};
    const std::vector<LabelSet> same{s1, s1, s1};
    for (const auto& row : round_robin(same, geo).f1) {
        for (double v : row) EXPECT_EQ(v, 1.0);
    }
    const auto rr = round_robin(std::vector{s1, s2, s3}, geo);
    EXPECT_EQ(rr.f1[0][1], 0.0);
    EXPECT_EQ(rr.f1[1][0], 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(rr.f1[i][i], 1.0);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(rr.f1[i][j], rr.f1[j][i], 1e-15);
    }
    EXPECT_GT(rr.f1[0][2], 0.3);
    ASSERT_EQ(rr.swelling.size(), 3u);
    EXPECT_EQ(rr.swelling[0].size(), 2u);
    const std::vector<std::string> names{"x", "y", "z"};
    EXPECT_EQ(round_robin_csv(rr, names).rfind("labeler,x,y,z\n", 0), 0u);
}

TEST(RoundRobin, BothEmptyCountsAsAgreement) {
    const std::map<std::string, ImageGeometry> geo{{"a", {50, 50, 0.1, 100.0}}};
    LabelSet e{{"a", {}}};
    const auto rr = round_robin(std::vector{e, e}, geo);
    EXPECT_EQ(rr.f1[0][1], 1.0);
}

TEST(RoundRobin, MismatchedIdsAreRejected) {
    const std::map<std::string, ImageGeometry> geo{{"a", {50, 50, 0.1, 100.0}}, {"b", {50, 50, 0.1, 100.0}}};
    LabelSet s1{{"a", {}}}, s2{{"b", {}}};
    EXPECT_THROW(round_robin(std::vector{s1, s2}, geo), DomainError);
    LabelSet s3{{"c", {}}};
    EXPECT_THROW(round_robin(std::vector{s3, s3}, geo), DomainError);
}
