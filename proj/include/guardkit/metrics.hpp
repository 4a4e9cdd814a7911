#pragma once

#include <optional>
#include <string>

#include "guardkit/jsonl.hpp"

namespace guardkit {

// Binary confusion counts. Positive class = violating/unsafe everywhere.
struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const { return tp + fp + fn + tn; }

    void add(bool gold_positive, bool predicted_positive) {
        if (gold_positive) {
            predicted_positive ? ++tp : ++fn;
        } else {
            predicted_positive ? ++fp : ++tn;
        }
    }
};

// Each metric is nullopt exactly when its denominator is zero.
std::optional<double> precision_of(const ConfusionCounts& c);
std::optional<double> recall_of(const ConfusionCounts& c);
std::optional<double> f1_of(const ConfusionCounts& c);       // 2TP/(2TP+FP+FN)
std::optional<double> fpr_of(const ConfusionCounts& c);      // FP/(FP+TN)

struct MetricsReport {
    std::string benchmark;
    ConfusionCounts counts;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> fpr;
    long parse_failures = 0;      // scored as wrong answers, tallied here too
    long transport_failures = 0;  // got no answer; excluded from the counts

    static MetricsReport from_counts(std::string benchmark, ConfusionCounts counts,
                                     long parse_failures = 0, long transport_failures = 0);
};

json metrics_to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const json& j);

// Fraction in [0,1] rendered as a percentage with `decimals` digits,
// rounded half-up. 0.919 -> "91.9%" at one decimal.
std::string format_percent(double fraction, int decimals);

// "—" for an undefined metric, otherwise format_percent.
std::string format_metric_cell(const std::optional<double>& v, int decimals);

}  // namespace guardkit
