#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guardkit/gateway.hpp"
#include "guardkit/metrics.hpp"
#include "guardkit/taxonomy.hpp"

namespace guardkit {

// Stage 1 output: one adversarial scenario aimed at a taxonomy category.
// scenario_id is a content hash of (category id, system prompt, user
// message), so identical generations dedup for free.
struct AdversarialScenario {
    std::string scenario_id;
    std::string source_category;
    std::string system_prompt;
    std::string user_message;
    std::string jailbreak_technique;
    std::string violation_title;
};

struct GeneratedResponse {
    std::string scenario_id;
    std::string responder_model;
    std::string ai_output;
};

struct Verdict {
    bool violation = false;  // parsed, never defaulted
    std::string raw_judge_output;
    std::optional<std::string> category;  // canonical slug when matched, verbatim otherwise
    bool category_matched = false;
};

struct JudgedPair {
    AdversarialScenario scenario;
    GeneratedResponse response;
    Verdict verdict;
    std::string judge_model;
};

// One skipped/failed unit of work; every stage reports these so counts
// reconcile with the output exactly.
struct StageFailure {
    std::string stage;
    std::string scenario_id;  // empty when unattributable
    std::string reason;
    std::string detail;
};

json scenario_to_json(const AdversarialScenario& s);
AdversarialScenario scenario_from_json(const json& j);
json response_to_json(const GeneratedResponse& r);
GeneratedResponse response_from_json(const json& j);
json verdict_to_json(const Verdict& v);
Verdict verdict_from_json(const json& j);
json judged_to_json(const JudgedPair& p);
JudgedPair judged_from_json(const json& j);
json failure_to_json(const StageFailure& f);

std::string make_scenario_id(const std::string& category_id, const std::string& system_prompt,
                             const std::string& user_message);

struct GenerateOptions {
    int per_category = 1;
    int attempt_budget = 8;  // max completions requested per category
};

struct GenerateResult {
    std::vector<AdversarialScenario> scenarios;  // sorted by scenario_id
    std::vector<StageFailure> failures;
    long objects_seen = 0;
    long malformed_skipped = 0;
    long duplicates_dropped = 0;
    long completions_requested = 0;
};

// Stage 1. Builds the generation prompt per category (policy block +
// jailbreak-planning scaffold from the template), extracts JSON objects from
// each completion, validates them, and retries until per_category scenarios
// exist or the attempt budget runs out (BudgetExhausted). Malformed objects
// are skipped and reported, never repaired.
GenerateResult generate_scenarios(Gateway& gateway, const PolicyDocument& policy,
                                  const std::string& generation_template,
                                  const EndpointProfile& generator, const GenerateOptions& options);

struct RespondResult {
    std::vector<GeneratedResponse> responses;
    std::vector<StageFailure> failures;
    long slots = 0;  // |scenarios| * per_scenario
};

// Stage 2. Sends each scenario's system prompt + user message to responders
// assigned round-robin over the (scenario, slot) sequence. Failed slots are
// reported and the run continues. in_flight bounds concurrent requests per
// responder endpoint.
RespondResult generate_responses(Gateway& gateway,
                                 const std::vector<AdversarialScenario>& scenarios,
                                 const std::vector<EndpointProfile>& responders, int per_scenario,
                                 int in_flight = 1);

struct JudgeResult {
    std::vector<JudgedPair> judged;
    std::vector<StageFailure> failures;
};

// Stage 3. Renders the validation prompt (community-standards overview +
// system/user/AI-output fields), asks the judge for the {"violation": ...}
// JSON shape, and parses with parse_verdict. Unparseable verdicts are
// reported per pair and excluded from the labeled output.
JudgeResult judge_pairs(Gateway& gateway,
                        const std::vector<std::pair<AdversarialScenario, GeneratedResponse>>& pairs,
                        const PolicyDocument& policy, const std::string& validation_template,
                        const EndpointProfile& judge, int in_flight = 1);

// Finds the first JSON object in raw judge text (whole string, fenced block,
// or embedded in prose) and reads `violation` as a boolean or the strings
// "true"/"false" case-insensitively. An optional string `category` field is
// captured verbatim. Raw text is preserved.
Verdict parse_verdict(const std::string& raw);

struct CalibrationReport {
    ConfusionCounts counts;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> fpr;
};

// Judge-vs-gold confusion with violation=true as the positive class.
// Every judged pair must have a gold label (MissingGold).
CalibrationReport calibrate_judge(const std::vector<JudgedPair>& judged,
                                  const std::map<std::string, bool>& gold);

CalibrationReport calibration_from_counts(const ConfusionCounts& counts);
json calibration_to_json(const CalibrationReport& r);

// "F1 score of 85.61%, FPR of 9.34% and recall of 90.36%" (two decimals,
// half-up; an undefined metric renders as a dash).
std::string format_calibration_summary(const CalibrationReport& r);

}  // namespace guardkit
