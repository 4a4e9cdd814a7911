#include "doctest.h"

#include <cmath>
#include <random>

#include "guardkit/metrics.hpp"
#include "guardkit/synth_pipeline.hpp"

using namespace guardkit;

TEST_CASE("metric formulas on the hand-computed fixture") {
    ConfusionCounts c{3, 2, 1, 4};
    CHECK(*precision_of(c) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(*recall_of(c) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(*f1_of(c) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*fpr_of(c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("each metric is undefined exactly when its denominator is zero") {
    CHECK_FALSE(precision_of({0, 0, 5, 5}).has_value());
    CHECK(recall_of({0, 3, 5, 0}).has_value());
    CHECK_FALSE(recall_of({0, 3, 0, 5}).has_value());
    CHECK_FALSE(fpr_of({3, 0, 1, 0}).has_value());
    CHECK_FALSE(f1_of({0, 0, 0, 9}).has_value());
    const ConfusionCounts zero{};
    CHECK_FALSE(precision_of(zero).has_value());
    CHECK_FALSE(recall_of(zero).has_value());
    CHECK_FALSE(f1_of(zero).has_value());
    CHECK_FALSE(fpr_of(zero).has_value());
}

TEST_CASE("f1 count form equals the harmonic form within 1 ulp") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 5000; ++i) {
        ConfusionCounts c;
        c.tp = static_cast<long>(rng() % 1000);
        c.fp = static_cast<long>(rng() % 1000);
        c.fn = static_cast<long>(rng() % 1000);
        c.tn = static_cast<long>(rng() % 1000);
        const auto p = precision_of(c);
        const auto r = recall_of(c);
        const auto f = f1_of(c);
        if (p && r && (*p + *r) > 0.0) {
            const double harmonic = 2.0 * *p * *r / (*p + *r);
            REQUIRE(f.has_value());
            const double ulp = std::nextafter(*f, 2.0) - *f;
            REQUIRE(std::fabs(*f - harmonic) <= 2 * ulp);
        }
        if (const auto fpr = fpr_of(c)) {
            REQUIRE(*fpr >= 0.0);
            REQUIRE(*fpr <= 1.0);
        }
        if (r) {
            REQUIRE(*r >= 0.0);
            REQUIRE(*r <= 1.0);
        }
    }
}

TEST_CASE("percentage formatting rounds half-up at the displayed precision") {
    CHECK(format_percent(0.919, 1) == "91.9%");
    CHECK(format_percent(1.0, 1) == "100.0%");
    CHECK(format_percent(0.0, 1) == "0.0%");
    CHECK(format_percent(0.856115, 2) == "85.61%");
    CHECK(format_percent(0.0933753, 2) == "9.34%");
    CHECK(format_percent(0.9036145, 2) == "90.36%");
    CHECK(format_percent(0.05, 0) == "5%");
    CHECK(format_metric_cell(std::nullopt, 1) == "—");
}

TEST_CASE("metrics reports round-trip through json") {
    const auto report = MetricsReport::from_counts("bench", {10, 2, 3, 15}, 1, 2);
    const json j = metrics_to_json(report);
    const auto back = metrics_from_json(j);
    CHECK(metrics_to_json(back) == j);
    CHECK(back.counts.tp == 10);
    CHECK(back.parse_failures == 1);
    CHECK(back.transport_failures == 2);

    const auto undefined = MetricsReport::from_counts("empty", {}, 0, 0);
    const json ju = metrics_to_json(undefined);
    CHECK(ju["f1"].is_null());
    CHECK_FALSE(metrics_from_json(ju).f1.has_value());
}

TEST_CASE("the calibration summary reproduces the reference presentation") {
    // counts constructed to land on the reference rates at two decimals
    const auto report = calibration_from_counts({7500, 1721, 800, 16710});
    CHECK(format_calibration_summary(report) ==
          "F1 score of 85.61%, FPR of 9.34% and recall of 90.36%");
}
