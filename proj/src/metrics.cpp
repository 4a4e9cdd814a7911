#include "guardkit/metrics.hpp"

#include <cmath>

namespace guardkit {

namespace {

json metric_json(const std::optional<double>& v) {
    if (!v) {
        return nullptr;
    }
    return *v;
}

std::optional<double> metric_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

}  // namespace

std::optional<double> precision_of(const ConfusionCounts& c) {
    const long d = c.tp + c.fp;
    if (d == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(d);
}

std::optional<double> recall_of(const ConfusionCounts& c) {
    const long d = c.tp + c.fn;
    if (d == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(d);
}

std::optional<double> f1_of(const ConfusionCounts& c) {
    const long d = 2 * c.tp + c.fp + c.fn;
    if (d == 0) return std::nullopt;
    return static_cast<double>(2 * c.tp) / static_cast<double>(d);
}

std::optional<double> fpr_of(const ConfusionCounts& c) {
    const long d = c.fp + c.tn;
    if (d == 0) return std::nullopt;
    return static_cast<double>(c.fp) / static_cast<double>(d);
}

MetricsReport MetricsReport::from_counts(std::string benchmark, ConfusionCounts counts,
                                         long parse_failures, long transport_failures) {
    MetricsReport r;
    r.benchmark = std::move(benchmark);
    r.counts = counts;
    r.precision = precision_of(counts);
    r.recall = recall_of(counts);
    r.f1 = f1_of(counts);
    r.fpr = fpr_of(counts);
    r.parse_failures = parse_failures;
    r.transport_failures = transport_failures;
    return r;
}

json metrics_to_json(const MetricsReport& r) {
    return json{{"schema", "guardkit/metrics@1"},
                {"benchmark", r.benchmark},
                {"tp", r.counts.tp},
                {"fp", r.counts.fp},
                {"fn", r.counts.fn},
                {"tn", r.counts.tn},
                {"precision", metric_json(r.precision)},
                {"recall", metric_json(r.recall)},
                {"f1", metric_json(r.f1)},
                {"fpr", metric_json(r.fpr)},
                {"parse_failures", r.parse_failures},
                {"transport_failures", r.transport_failures}};
}

MetricsReport metrics_from_json(const json& j) {
    MetricsReport r;
    r.benchmark = j.value("benchmark", "");
    r.counts.tp = j.value("tp", 0L);
    r.counts.fp = j.value("fp", 0L);
    r.counts.fn = j.value("fn", 0L);
    r.counts.tn = j.value("tn", 0L);
    r.precision = metric_from(j, "precision");
    r.recall = metric_from(j, "recall");
    r.f1 = metric_from(j, "f1");
    r.fpr = metric_from(j, "fpr");
    r.parse_failures = j.value("parse_failures", 0L);
    r.transport_failures = j.value("transport_failures", 0L);
    return r;
}

std::string format_percent(double fraction, int decimals) {
    long long scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const long long scaled = std::llround(fraction * 100.0 * static_cast<double>(scale));
    std::string digits = std::to_string(scaled / scale);
    if (decimals == 0) {
        return digits + "%";
    }
    std::string frac = std::to_string(scaled % scale);
    frac.insert(frac.begin(), static_cast<std::size_t>(decimals) - frac.size(), '0');
    return digits + "." + frac + "%";
}

std::string format_metric_cell(const std::optional<double>& v, int decimals) {
    if (!v) {
        return "—";
    }
    return format_percent(*v, decimals);
}

}  // namespace guardkit
