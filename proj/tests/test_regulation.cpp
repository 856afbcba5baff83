#include "cavityforge/errors.hpp"
#include "cavityforge/regulation.hpp"
#include "cavityforge/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace cavityforge;
using namespace cavityforge::regulation;
using io::BoxRecord;

namespace {

BoxRecord pred(double w, double h, double c) { return {0, 0.5, 0.5, w, h, c}; }

std::vector<BoxRecord> random_predictions(Engine& eng, int n) {
    std::vector<BoxRecord> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(pred(0.005 + 0.2 * uniform01(eng), 0.005 + 0.2 * uniform01(eng), uniform01(eng)));
    }
    return out;
}

}  // namespace

TEST(Presets, InclusivityTable) {
    EXPECT_EQ(ThresholdPreset::high_inclusivity().individual, 0.45);
    EXPECT_EQ(ThresholdPreset::high_inclusivity().image, 0.65);
    EXPECT_EQ(ThresholdPreset::standard().individual, 0.4);
    EXPECT_EQ(ThresholdPreset::standard().image, 0.7);
    EXPECT_EQ(ThresholdPreset::low_inclusivity().individual, 0.35);
    EXPECT_EQ(ThresholdPreset::low_inclusivity().image, 0.75);
    EXPECT_EQ(preset_by_name("Standard"), ThresholdPreset::standard());
    EXPECT_EQ(preset_by_name("high"), ThresholdPreset::high_inclusivity());
    EXPECT_EQ(preset_by_name("LOW"), ThresholdPreset::low_inclusivity());
    try {
        preset_by_name("medium");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("high, standard, low"), std::string::npos);
    }
}

TEST(Presets, OrderingWarning) {
    EXPECT_FALSE(ThresholdPreset::standard().ordering_warning());
    EXPECT_TRUE(ThresholdPreset::custom(0.8, 0.5).ordering_warning());
    EXPECT_TRUE(ThresholdPreset::custom(-0.1, 0.5).ordering_warning());
    EXPECT_TRUE(ThresholdPreset::custom(0.3, 1.2).ordering_warning());
}

TEST(ImageConfidence, WorkedExample) {
    const std::vector<BoxRecord> p{pred(0.2, 0.2, 0.9), pred(0.1, 0.1, 0.5)};
    const double got = image_confidence(p);
    EXPECT_EQ(got, oracle::weighted_confidence_exact(p));
    EXPECT_LE(std::abs(got - 0.82), std::nextafter(0.82, 1.0) - 0.82);
}

TEST(ImageConfidence, ConstantConfidenceIsExact) {
    Engine eng(2);
    for (double c : {0.0, 0.3, 0.7, 1.0}) {
        auto p = random_predictions(eng, 17);
        for (auto& b : p) b.confidence = c;
        EXPECT_EQ(image_confidence(p), c);
    }
}

TEST(ImageConfidence, EmptyAndMissingConfidence) {
    EXPECT_EQ(image_confidence({}), 0.0);
    const std::vector<BoxRecord> labels{{0, 0.5, 0.5, 0.1, 0.1, std::nullopt}};
    EXPECT_THROW(image_confidence(labels), DomainError);
}

TEST(ImageConfidence, ZeroAreaFallsBackToPlainMean) {
    const std::vector<BoxRecord> p{pred(0.0, 0.1, 0.2), pred(0.1, 0.0, 0.6)};
    EXPECT_DOUBLE_EQ(image_confidence(p), 0.4);
}

TEST(ImageConfidence, RandomSetsAgainstOracles) {
    Engine eng(7);
    for (int t = 0; t < 1000; ++t) {
        const auto p = random_predictions(eng, 1 + static_cast<int>(uniform01(eng) * 40));
        const double got = image_confidence(p);
        EXPECT_NEAR(got, oracle::weighted_confidence(p), 1e-12);
        double lo = 1.0, hi = 0.0;
        for (const auto& b : p) {
            lo = std::min(lo, *b.confidence);
            hi = std::max(hi, *b.confidence);
        }
        EXPECT_GE(got, lo);
        EXPECT_LE(got, hi);
        auto scaled = p;
        const double k = 0.1 + 4.0 * uniform01(eng);
        for (auto& b : scaled) {
            b.w *= k;
            b.h *= k;
        }
        EXPECT_NEAR(image_confidence(scaled), got, 1e-12);
    }
}

TEST(ApplyFilter, SingleConfidentPrediction) {
    const std::vector<BoxRecord> p{pred(0.1, 0.1, 0.95)};
    const auto d = apply_filter("a", p, ThresholdPreset::standard());
    EXPECT_TRUE(d.passed);
    EXPECT_EQ(d.image_confidence, 0.95);
}

TEST(ApplyFilter, JustBelowImageThresholdFails) {
    const std::vector<BoxRecord> p{pred(0.1, 0.1, 0.69)};
    EXPECT_FALSE(apply_filter("a", p, ThresholdPreset::standard()).passed);
}

TEST(ApplyFilter, MixedSetMeetsThresholdInclusively) {
    const std::vector<BoxRecord> p{pred(0.1, 0.1, 0.35), pred(0.1, 0.1, 0.5), pred(0.1, 0.1, 0.9)};
    const auto d = apply_filter("a", p, ThresholdPreset::standard());
    EXPECT_EQ(d.surviving.size(), 2u);
    EXPECT_EQ(d.total_predictions, 3u);
    EXPECT_NEAR(d.image_confidence, 0.7, 1e-15);
    EXPECT_TRUE(d.passed);
}

TEST(ApplyFilter, ZeroPredictionPolicy) {
    const std::vector<BoxRecord> p{pred(0.1, 0.1, 0.1)};
    const auto fail = apply_filter("a", p, ThresholdPreset::standard());
    EXPECT_FALSE(fail.passed);
    EXPECT_EQ(fail.image_confidence, 0.0);
    EXPECT_TRUE(fail.surviving.empty());
    EXPECT_TRUE(apply_filter("a", p, ThresholdPreset::standard(), ZeroPredictionPolicy::PassThrough).passed);
    EXPECT_FALSE(apply_filter("a", {}, ThresholdPreset::standard()).passed);
}

TEST(ApplyFilter, SurvivorsMeetIndividualThreshold) {
    Engine eng(5);
    for (int t = 0; t < 200; ++t) {
        const auto p = random_predictions(eng, 30);
        for (const auto& preset : {ThresholdPreset::high_inclusivity(), ThresholdPreset::standard(),
                                   ThresholdPreset::low_inclusivity()}) {
            const auto d = apply_filter("x", p, preset);
            for (const auto& b : d.surviving) EXPECT_GE(*b.confidence, preset.individual);
            const auto n = std::count_if(p.begin(), p.end(),
                                         [&](const BoxRecord& b) { return *b.confidence >= preset.individual; });
            EXPECT_EQ(d.surviving.size(), static_cast<std::size_t>(n));
            EXPECT_EQ(d.passed, !d.surviving.empty() && d.image_confidence >= preset.image);
        }
    }
}

TEST(ApplyFilter, PresetsNest) {
    Engine eng(11);
    for (int t = 0; t < 500; ++t) {
        auto p = random_predictions(eng, 1 + static_cast<int>(uniform01(eng) * 25));
        for (auto& b : p) b.confidence = 0.3 + 0.6 * uniform01(eng);
        const bool low = apply_filter("x", p, ThresholdPreset::low_inclusivity()).passed;
        const bool standard = apply_filter("x", p, ThresholdPreset::standard()).passed;
        const bool high = apply_filter("x", p, ThresholdPreset::high_inclusivity()).passed;
        EXPECT_TRUE(!low || standard) << t;
        EXPECT_TRUE(!standard || high) << t;
    }
}

TEST(ApplyFilter, RaisingImageThresholdNeverRescues) {
    Engine eng(13);
    for (int t = 0; t < 200; ++t) {
        const auto p = random_predictions(eng, 12);
        bool prev = true;
        for (double img = 0.0; img <= 1.0; img += 0.05) {
            const bool passed = apply_filter("x", p, ThresholdPreset::custom(0.4, img)).passed;
            EXPECT_TRUE(prev || !passed);
            prev = passed;
        }
    }
}

TEST(FilteringReport, Rates) {
    std::vector<FilterDecision> d(20);
    for (int i = 0; i < 20; ++i) d[i].passed = i >= 5;
    auto r = filtering_report(d);
    EXPECT_EQ(r.failed, 5u);
    EXPECT_DOUBLE_EQ(r.filtering_rate, 0.25);
    EXPECT_EQ(r.rate_display(), "25%");
    for (auto& x : d) x.passed = true;
    EXPECT_EQ(filtering_report(d).rate_display(), "0%");
    for (auto& x : d) x.passed = false;
    EXPECT_EQ(filtering_report(d).rate_display(), "100%");
    EXPECT_THROW(filtering_report({}), DomainError);
}

TEST(FilteringReport, OrderIndependent) {
    Engine eng(17);
    std::vector<FilterDecision> d;
    for (int i = 0; i < 50; ++i) {
        d.push_back(apply_filter("img" + std::to_string(i), random_predictions(eng, 8), ThresholdPreset::standard()));
    }
    const auto a = filtering_report(d);
    std::shuffle(d.begin(), d.end(), eng);
    const auto b = filtering_report(d);
    EXPECT_EQ(a.failed, b.failed);
    EXPECT_EQ(a.filtering_rate, b.filtering_rate);
}

TEST(FilteringReport, Csv) {
    const std::vector<BoxRecord> p{pred(0.1, 0.1, 0.95), pred(0.1, 0.1, 0.2)};
    const auto r = filtering_report(std::vector{apply_filter("img_7", p, ThresholdPreset::standard())});
    EXPECT_EQ(decisions_csv(r), "image_id,predictions,surviving,image_confidence,passed\nimg_7,2,1,0.950000,1\n");
}
