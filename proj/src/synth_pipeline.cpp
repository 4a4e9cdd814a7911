#include "guardkit/synth_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "guardkit/errors.hpp"
#include "guardkit/hash.hpp"
#include "guardkit/json_extract.hpp"
#include "guardkit/parallel.hpp"
#include "guardkit/template_engine.hpp"

namespace guardkit {

namespace {

std::string trimmed(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string truncate_detail(const std::string& s, std::size_t max = 400) {
    if (s.size() <= max) {
        return s;
    }
    return s.substr(0, max) + "...";
}

std::optional<std::string> string_field(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj.at(key).is_string()) {
        return std::nullopt;
    }
    return obj.at(key).get<std::string>();
}

}  // namespace

json scenario_to_json(const AdversarialScenario& s) {
    return json{{"schema", "guardkit/scenario@1"},
                {"scenario_id", s.scenario_id},
                {"source_category", s.source_category},
                {"system_prompt", s.system_prompt},
                {"user_message", s.user_message},
                {"jailbreak_technique", s.jailbreak_technique},
                {"violation_title", s.violation_title}};
}

AdversarialScenario scenario_from_json(const json& j) {
    AdversarialScenario s;
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.source_category = j.value("source_category", "");
    s.system_prompt = j.at("system_prompt").get<std::string>();
    s.user_message = j.at("user_message").get<std::string>();
    s.jailbreak_technique = j.value("jailbreak_technique", "");
    s.violation_title = j.value("violation_title", "");
    return s;
}

json response_to_json(const GeneratedResponse& r) {
    return json{{"schema", "guardkit/response@1"},
                {"scenario_id", r.scenario_id},
                {"responder_model", r.responder_model},
                {"ai_output", r.ai_output}};
}

GeneratedResponse response_from_json(const json& j) {
    GeneratedResponse r;
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.responder_model = j.value("responder_model", "");
    r.ai_output = j.at("ai_output").get<std::string>();
    return r;
}

json verdict_to_json(const Verdict& v) {
    json j{{"violation", v.violation}, {"raw_judge_output", v.raw_judge_output}};
    if (v.category) {
        j["category"] = *v.category;
        j["category_matched"] = v.category_matched;
    }
    return j;
}

Verdict verdict_from_json(const json& j) {
    Verdict v;
    v.violation = j.at("violation").get<bool>();
    v.raw_judge_output = j.value("raw_judge_output", "");
    if (j.contains("category") && j["category"].is_string()) {
        v.category = j["category"].get<std::string>();
        v.category_matched = j.value("category_matched", false);
    }
    return v;
}

json judged_to_json(const JudgedPair& p) {
    return json{{"schema", "guardkit/judged@1"},
                {"scenario", scenario_to_json(p.scenario)},
                {"response", response_to_json(p.response)},
                {"verdict", verdict_to_json(p.verdict)},
                {"judge_model", p.judge_model}};
}

JudgedPair judged_from_json(const json& j) {
    JudgedPair p;
    p.scenario = scenario_from_json(j.at("scenario"));
    p.response = response_from_json(j.at("response"));
    p.verdict = verdict_from_json(j.at("verdict"));
    p.judge_model = j.value("judge_model", "");
    return p;
}

json failure_to_json(const StageFailure& f) {
    return json{{"schema", "guardkit/failure@1"},
                {"stage", f.stage},
                {"scenario_id", f.scenario_id},
                {"reason", f.reason},
                {"detail", f.detail}};
}

std::string make_scenario_id(const std::string& category_id, const std::string& system_prompt,
                             const std::string& user_message) {
    return "sc-" + to_hex16(content_hash({category_id, system_prompt, user_message}));
}

GenerateResult generate_scenarios(Gateway& gateway, const PolicyDocument& policy,
                                  const std::string& generation_template,
                                  const EndpointProfile& generator,
                                  const GenerateOptions& options) {
    if (options.per_category < 1) {
        throw ConfigError("per_category must be >= 1");
    }
    if (options.attempt_budget < 1) {
        throw ConfigError("attempt_budget must be >= 1");
    }

    GenerateResult result;
    std::set<std::string> seen_ids;

    for (const auto& category : policy.categories) {
        const std::string policy_block = render_policy_block(policy, {category.id});
        int valid_for_category = 0;
        int attempts = 0;
        while (valid_for_category < options.per_category && attempts < options.attempt_budget) {
            ++attempts;
            ++result.completions_requested;
            const int remaining = options.per_category - valid_for_category;
            const std::string prompt = render_template(
                generation_template, {{"policy_block", policy_block},
                                      {"count", std::to_string(remaining)}});
            const ChatExchange exchange = gateway.complete(generator, {{"user", prompt}});
            for (const auto& obj : extract_json_objects(exchange.completion)) {
                ++result.objects_seen;
                const auto system_prompt = string_field(obj, "System Prompt");
                const auto user_message = string_field(obj, "User Message");
                const auto technique = string_field(obj, "Jailbreak Techniques");
                const auto title = string_field(obj, "Violation Title");
                if (!system_prompt || !user_message || !technique || !title ||
                    trimmed(*system_prompt).empty() || trimmed(*user_message).empty()) {
                    ++result.malformed_skipped;
                    result.failures.push_back({"generate", "", "malformed_scenario",
                                               truncate_detail(dump_canonical(obj))});
                    continue;
                }
                AdversarialScenario s;
                s.source_category = category.id;
                s.system_prompt = *system_prompt;
                s.user_message = *user_message;
                s.jailbreak_technique = *technique;
                s.violation_title = *title;
                s.scenario_id = make_scenario_id(s.source_category, s.system_prompt, s.user_message);
                if (!seen_ids.insert(s.scenario_id).second) {
                    ++result.duplicates_dropped;
                    continue;
                }
                result.scenarios.push_back(std::move(s));
                ++valid_for_category;
            }
        }
        if (valid_for_category < options.per_category) {
            throw BudgetExhausted("category " + category.id + ": produced " +
                                  std::to_string(valid_for_category) + "/" +
                                  std::to_string(options.per_category) + " scenarios within " +
                                  std::to_string(options.attempt_budget) + " completions");
        }
    }

    std::sort(result.scenarios.begin(), result.scenarios.end(),
              [](const auto& a, const auto& b) { return a.scenario_id < b.scenario_id; });
    return result;
}

RespondResult generate_responses(Gateway& gateway,
                                 const std::vector<AdversarialScenario>& scenarios,
                                 const std::vector<EndpointProfile>& responders, int per_scenario,
                                 int in_flight) {
    if (responders.empty()) {
        throw ConfigError("generate_responses needs at least one responder");
    }
    if (per_scenario < 1) {
        throw ConfigError("per_scenario must be >= 1");
    }

    struct Slot {
        const AdversarialScenario* scenario;
        std::size_t responder;
    };
    std::vector<Slot> slots;
    slots.reserve(scenarios.size() * static_cast<std::size_t>(per_scenario));
    std::size_t cursor = 0;
    for (const auto& scenario : scenarios) {
        for (int k = 0; k < per_scenario; ++k) {
            slots.push_back({&scenario, cursor % responders.size()});
            ++cursor;
        }
    }

    std::vector<std::optional<GeneratedResponse>> outcomes(slots.size());
    std::vector<std::optional<StageFailure>> failures(slots.size());
    std::vector<std::unique_ptr<Semaphore>> endpoint_slots;
    for (std::size_t i = 0; i < responders.size(); ++i) {
        endpoint_slots.push_back(std::make_unique<Semaphore>(std::max(1, in_flight)));
    }

    parallel_for_index(slots.size(), in_flight * static_cast<int>(responders.size()), [&](std::size_t i) {
        const Slot& slot = slots[i];
        const EndpointProfile& responder = responders[slot.responder];
        SemaphoreGuard guard(*endpoint_slots[slot.responder]);
        try {
            const ChatExchange exchange =
                gateway.complete(responder, {{"system", slot.scenario->system_prompt},
                                             {"user", slot.scenario->user_message}});
            const std::string output = trimmed(exchange.completion);
            if (output.empty()) {
                failures[i] = StageFailure{"respond", slot.scenario->scenario_id, "empty_response",
                                           "responder " + responder.model};
                return;
            }
            outcomes[i] = GeneratedResponse{slot.scenario->scenario_id, responder.model, output};
        } catch (const Error& e) {
            failures[i] = StageFailure{"respond", slot.scenario->scenario_id, "transport",
                                       truncate_detail(e.what())};
        }
    });

    RespondResult result;
    result.slots = static_cast<long>(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (outcomes[i]) {
            result.responses.push_back(std::move(*outcomes[i]));
        } else if (failures[i]) {
            result.failures.push_back(std::move(*failures[i]));
        }
    }
    std::sort(result.responses.begin(), result.responses.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario_id, a.responder_model, a.ai_output) <
               std::tie(b.scenario_id, b.responder_model, b.ai_output);
    });
    std::sort(result.failures.begin(), result.failures.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario_id, a.reason, a.detail) <
               std::tie(b.scenario_id, b.reason, b.detail);
    });
    return result;
}

JudgeResult judge_pairs(Gateway& gateway,
                        const std::vector<std::pair<AdversarialScenario, GeneratedResponse>>& pairs,
                        const PolicyDocument& policy, const std::string& validation_template,
                        const EndpointProfile& judge, int in_flight) {
    const std::string overview = render_policy_overview(policy);

    std::vector<std::optional<JudgedPair>> outcomes(pairs.size());
    std::vector<std::optional<StageFailure>> failures(pairs.size());

    parallel_for_index(pairs.size(), in_flight, [&](std::size_t i) {
        const auto& [scenario, response] = pairs[i];
        if (response.scenario_id != scenario.scenario_id) {
            failures[i] = StageFailure{"judge", response.scenario_id, "scenario_mismatch",
                                       "response does not reference the paired scenario"};
            return;
        }
        const std::string prompt =
            render_template(validation_template, {{"policy_overview", overview},
                                                  {"system", scenario.system_prompt},
                                                  {"user", scenario.user_message},
                                                  {"ai_output", response.ai_output}});
        try {
            const ChatExchange exchange = gateway.complete(judge, {{"user", prompt}});
            Verdict verdict = parse_verdict(exchange.completion);
            if (verdict.category) {
                const std::string slug = normalize_category_name(*verdict.category);
                if (!slug.empty() && policy.has_category(slug)) {
                    verdict.category = slug;
                    verdict.category_matched = true;
                } else {
                    verdict.category_matched = false;  // preserved verbatim, flagged
                }
            }
            outcomes[i] = JudgedPair{scenario, response, std::move(verdict), judge.model};
        } catch (const VerdictParseError& e) {
            failures[i] = StageFailure{"judge", scenario.scenario_id, "verdict_parse",
                                       truncate_detail(e.what())};
        } catch (const Error& e) {
            failures[i] = StageFailure{"judge", scenario.scenario_id, "transport",
                                       truncate_detail(e.what())};
        }
    });

    JudgeResult result;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (outcomes[i]) {
            result.judged.push_back(std::move(*outcomes[i]));
        } else if (failures[i]) {
            result.failures.push_back(std::move(*failures[i]));
        }
    }
    std::sort(result.judged.begin(), result.judged.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario.scenario_id, a.response.responder_model, a.response.ai_output) <
               std::tie(b.scenario.scenario_id, b.response.responder_model, b.response.ai_output);
    });
    std::sort(result.failures.begin(), result.failures.end(), [](const auto& a, const auto& b) {
        return std::tie(a.scenario_id, a.reason, a.detail) <
               std::tie(b.scenario_id, b.reason, b.detail);
    });
    return result;
}

Verdict parse_verdict(const std::string& raw) {
    const auto obj = extract_first_json_object(raw);
    if (!obj) {
        throw VerdictParseError("no JSON object found in judge output");
    }
    if (!obj->contains("violation")) {
        throw VerdictParseError("judge object lacks a `violation` field");
    }
    Verdict v;
    v.raw_judge_output = raw;
    const auto& value = (*obj)["violation"];
    if (value.is_boolean()) {
        v.violation = value.get<bool>();
    } else if (value.is_string()) {
        std::string s = value.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (s == "true") {
            v.violation = true;
        } else if (s == "false") {
            v.violation = false;
        } else {
            throw VerdictParseError("uninterpretable `violation` value: " + s);
        }
    } else {
        throw VerdictParseError("`violation` is neither boolean nor string");
    }
    if (obj->contains("category") && (*obj)["category"].is_string()) {
        const std::string c = (*obj)["category"].get<std::string>();
        if (!trimmed(c).empty()) {
            v.category = c;
        }
    }
    return v;
}

CalibrationReport calibration_from_counts(const ConfusionCounts& counts) {
    CalibrationReport r;
    r.counts = counts;
    r.precision = precision_of(counts);
    r.recall = recall_of(counts);
    r.f1 = f1_of(counts);
    r.fpr = fpr_of(counts);
    return r;
}

CalibrationReport calibrate_judge(const std::vector<JudgedPair>& judged,
                                  const std::map<std::string, bool>& gold) {
    ConfusionCounts counts;
    for (const auto& pair : judged) {
        const auto it = gold.find(pair.scenario.scenario_id);
        if (it == gold.end()) {
            throw MissingGold("no gold label for scenario " + pair.scenario.scenario_id);
        }
        counts.add(it->second, pair.verdict.violation);
    }
    return calibration_from_counts(counts);
}

json calibration_to_json(const CalibrationReport& r) {
    auto metric = [](const std::optional<double>& v) -> json {
        if (!v) return nullptr;
        return *v;
    };
    return json{{"schema", "guardkit/calibration@1"},
                {"tp", r.counts.tp},
                {"fp", r.counts.fp},
                {"fn", r.counts.fn},
                {"tn", r.counts.tn},
                {"precision", metric(r.precision)},
                {"recall", metric(r.recall)},
                {"f1", metric(r.f1)},
                {"fpr", metric(r.fpr)}};
}

std::string format_calibration_summary(const CalibrationReport& r) {
    return "F1 score of " + format_metric_cell(r.f1, 2) + ", FPR of " +
           format_metric_cell(r.fpr, 2) + " and recall of " + format_metric_cell(r.recall, 2);
}

}  // namespace guardkit
