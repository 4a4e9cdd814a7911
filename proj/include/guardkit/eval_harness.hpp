#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guardkit/dataset_builder.hpp"
#include "guardkit/gateway.hpp"
#include "guardkit/metrics.hpp"
#include "guardkit/taxonomy.hpp"

namespace guardkit {

enum class BenchLevel { Prompt, Response };

const char* bench_level_name(BenchLevel level);
BenchLevel bench_level_from_name(const std::string& name);

struct BenchmarkRecord {
    std::string id;
    std::string prompt;
    std::optional<std::string> response;  // present iff level == Response
    bool label = false;                   // gold, violating = positive
    std::optional<std::string> category;  // gold category slug
    std::string benchmark;
    BenchLevel level = BenchLevel::Prompt;
};

json benchmark_record_to_json(const BenchmarkRecord& r);
BenchmarkRecord benchmark_record_from_json(const json& j);

// Per-benchmark adapter config mapping third-party record fields onto
// BenchmarkRecord; `assets/benchmarks/` ships configs for the usual suites.
struct BenchmarkAdapter {
    std::string benchmark;
    BenchLevel level = BenchLevel::Prompt;
    std::string id_field;  // empty: synthesize rec-<n>
    std::string prompt_field = "prompt";
    std::string response_field = "response";
    std::string label_field = "label";
    std::string category_field = "category";
    std::vector<json> positive_values = {json(true), json("true"), json("unsafe"),
                                         json("violating"), json(1)};
    std::vector<json> negative_values = {json(false), json("false"), json("safe"),
                                         json("non-violating"), json(0)};
};

BenchmarkAdapter load_benchmark_adapter(const std::filesystem::path& path);

struct AdaptResult {
    std::vector<BenchmarkRecord> records;
    std::vector<StageFailure> failures;
};
AdaptResult adapt_benchmark_records(const std::vector<json>& raw, const BenchmarkAdapter& adapter);

// Parsed guard answer. label comes from a [LABEL] component and is never
// defaulted; components are accepted in any order.
struct GuardVerdict {
    bool label = false;  // unsafe = positive
    std::optional<std::string> category;
    std::optional<std::string> cot;
    std::string raw;
    std::vector<TargetComponent> observed_order;
};

// Scans for [REASONING] / [LABEL] / [CATEGORY] tags in any order. Label
// synonyms (case-insensitive): unsafe|violating|true -> positive,
// safe|non-violating|false -> negative. Conflicting [LABEL] values or a
// missing/uninterpretable label raise GuardParseError.
GuardVerdict parse_guard_output(const std::string& raw);

// Builds the classification chat (system: framing + taxonomy block, user:
// prompt [+ response]) and parses the guard's completion.
GuardVerdict classify(Gateway& gateway, const BenchmarkRecord& record,
                      const PolicyDocument& policy, const ClassifyTemplates& templates,
                      const EndpointProfile& guard);

struct CategoryBreakdownRow {
    std::string category;  // "(none)" for uncategorized gold records
    long records = 0;
    long correct = 0;  // binary label matched gold
};

struct EvalResult {
    MetricsReport report;
    std::vector<CategoryBreakdownRow> category_breakdown;
    std::vector<StageFailure> failures;
};

// Classifies every record and folds the confusion matrix deterministically
// in record-id order. Parse failures score as wrong answers (gold positive
// -> FN, gold negative -> FP) and are tallied separately; records that got
// no answer at all are excluded from the counts and tallied as transport
// failures, so counts.total() + transport_failures == |records|.
EvalResult evaluate_benchmark(Gateway& gateway, const std::vector<BenchmarkRecord>& records,
                              const PolicyDocument& policy, const ClassifyTemplates& templates,
                              const EndpointProfile& guard, int in_flight = 1);

struct BenchReportEntry {
    MetricsReport report;
    BenchLevel level = BenchLevel::Prompt;
};

// Per-benchmark F1 percentages (one decimal, half-up) grouped into
// prompt-based and response-based sections. Undefined scores render as a
// dash with a footnote.
std::string render_report_table(const std::vector<BenchReportEntry>& entries);
std::vector<json> report_entries_to_records(const std::vector<BenchReportEntry>& entries);

struct ExpertVote {
    std::string record_id;
    std::string annotator;
    bool label = false;
    std::optional<std::string> category;
};

ExpertVote expert_vote_from_json(const json& j);

struct Adjudication {
    bool label = false;
    std::optional<std::string> category;
};

// 2-of-3 adjudication: exactly three votes for one record from distinct
// annotators (MalformedVotes otherwise). label = the majority value; the
// category must be chosen by >= 2 of the majority voters, else none.
Adjudication adjudicate(const std::vector<ExpertVote>& votes);

struct EvalManifestRow {
    std::optional<std::string> category;  // nullopt = the None row
    long count = 0;
};

struct EvalSetManifest {
    long total = 0;
    std::vector<EvalManifestRow> rows;
};

EvalSetManifest eval_manifest_from_json(const json& j);
json eval_manifest_to_json(const EvalSetManifest& m);

// Category distribution must sum to the declared total, with no duplicate
// category rows and no negative counts.
void validate_eval_manifest(const EvalSetManifest& m);

}  // namespace guardkit
