#include "doctest.h"

#include <memory>
#include <random>

#include "guardkit/dataset_builder.hpp"
#include "guardkit/errors.hpp"
#include "guardkit/eval_harness.hpp"
#include "guardkit/scripted_endpoint.hpp"
#include "guardkit/template_engine.hpp"

#include "test_util.hpp"

using namespace guardkit;

namespace {

ClassifyTemplates load_classify_templates() {
    ClassifyTemplates t;
    t.system_prompt = load_template_file(testutil::templates_dir() / "classify_system_prompt.txt");
    t.user_prompt = load_template_file(testutil::templates_dir() / "classify_user_prompt.txt");
    t.system_response =
        load_template_file(testutil::templates_dir() / "classify_system_response.txt");
    t.user_response = load_template_file(testutil::templates_dir() / "classify_user_response.txt");
    return t;
}

PolicyDocument tiny_policy() {
    return parse_policy_text(
        "title: Tiny\nversion: 1\n"
        "# category:\nid: spam\nname: Spam\n  unsolicited\n"
        "# category:\nid: profanity\nname: Profanity\n  vulgar\n");
}

EndpointProfile guard_profile() {
    EndpointProfile p;
    p.base_url = "http://unused:1";
    p.model = "guard";
    p.retry.max_attempts = 1;
    return p;
}

ExpertVote vote(const std::string& annotator, bool label,
                std::optional<std::string> category = std::nullopt) {
    ExpertVote v;
    v.record_id = "rec-1";
    v.annotator = annotator;
    v.label = label;
    v.category = std::move(category);
    return v;
}

BenchmarkRecord prompt_record(const std::string& id, const std::string& prompt, bool label) {
    BenchmarkRecord r;
    r.id = id;
    r.prompt = prompt;
    r.label = label;
    r.benchmark = "bench";
    r.level = BenchLevel::Prompt;
    return r;
}

}  // namespace

TEST_CASE("two of three experts decide the label") {
    CHECK(adjudicate({vote("a", true), vote("b", true), vote("c", false)}).label == true);
    CHECK(adjudicate({vote("a", false), vote("b", false), vote("c", false)}).label == false);
    CHECK(adjudicate({vote("a", false), vote("b", true), vote("c", false)}).label == false);
}

TEST_CASE("the category needs two majority voters to agree") {
    const auto split = adjudicate(
        {vote("a", true, "spam"), vote("b", true, "profanity"), vote("c", false)});
    CHECK(split.label == true);
    CHECK_FALSE(split.category.has_value());

    const auto agreed = adjudicate(
        {vote("a", true, "spam"), vote("b", true, "spam"), vote("c", false, "profanity")});
    REQUIRE(agreed.category.has_value());
    CHECK(*agreed.category == "spam");

    // a minority voter's category never counts, even if it matches
    const auto minority = adjudicate(
        {vote("a", true, "spam"), vote("b", true), vote("c", false, "spam")});
    CHECK_FALSE(minority.category.has_value());
}

TEST_CASE("malformed vote sets are rejected") {
    CHECK_THROWS_AS(adjudicate({vote("a", true), vote("b", true)}), MalformedVotes);
    CHECK_THROWS_AS(adjudicate({vote("a", true), vote("a", true), vote("b", false)}),
                    MalformedVotes);
    auto other = vote("c", true);
    other.record_id = "rec-2";
    CHECK_THROWS_AS(adjudicate({vote("a", true), vote("b", true), other}), MalformedVotes);
}

TEST_CASE("any three well-formed binary votes produce a label") {
    for (int mask = 0; mask < 8; ++mask) {
        const auto result = adjudicate({vote("a", mask & 1), vote("b", mask & 2), vote("c", mask & 4)});
        const int positives = !!(mask & 1) + !!(mask & 2) + !!(mask & 4);
        CHECK(result.label == (positives >= 2));
    }
}

TEST_CASE("parse_guard_output reads the tagged grammar in any order") {
    const auto minimal = parse_guard_output("[LABEL] safe");
    CHECK(minimal.label == false);
    CHECK_FALSE(minimal.category.has_value());
    CHECK_FALSE(minimal.cot.has_value());
    CHECK(minimal.observed_order == std::vector<TargetComponent>{TargetComponent::Label});

    const auto reordered = parse_guard_output("[CATEGORY] profanity [LABEL] unsafe");
    CHECK(reordered.label == true);
    CHECK(reordered.category == "profanity");
    CHECK(reordered.observed_order ==
          std::vector<TargetComponent>{TargetComponent::Category, TargetComponent::Label});

    const auto with_cot =
        parse_guard_output("[REASONING] it repeats an ad [CATEGORY] spam [LABEL] unsafe");
    CHECK(with_cot.label == true);
    CHECK(with_cot.category == "spam");
    CHECK(with_cot.cot == "it repeats an ad");
}

TEST_CASE("label synonyms are accepted case-insensitively") {
    CHECK(parse_guard_output("[LABEL] Unsafe").label == true);
    CHECK(parse_guard_output("[LABEL] VIOLATING").label == true);
    CHECK(parse_guard_output("[LABEL] true").label == true);
    CHECK(parse_guard_output("[LABEL] Safe").label == false);
    CHECK(parse_guard_output("[LABEL] non-violating").label == false);
    CHECK(parse_guard_output("[LABEL] False.").label == false);
}

TEST_CASE("conflicting or missing labels are parse errors") {
    CHECK_THROWS_AS(parse_guard_output("[LABEL] Unsafe [LABEL] safe"), GuardParseError);
    CHECK_THROWS_AS(parse_guard_output("free prose with no tags"), GuardParseError);
    CHECK_THROWS_AS(parse_guard_output("[REASONING] thinking only"), GuardParseError);
    CHECK_THROWS_AS(parse_guard_output("[LABEL] perhaps"), GuardParseError);
    // duplicates that agree are tolerated
    CHECK(parse_guard_output("[LABEL] unsafe [LABEL] unsafe").label == true);
}

TEST_CASE("parsing recovers the identical triple from every rendered ordering") {
    std::mt19937_64 rng(7);
    auto word = [&rng]() {
        static const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
        return std::string(words[rng() % 6]);
    };
    const auto universe = permutations_for(
        {TargetComponent::CoT, TargetComponent::Label, TargetComponent::Category});
    REQUIRE(universe.size() == 6);

    for (int trial = 0; trial < 100; ++trial) {
        LabeledExample e;
        e.label = rng() % 2 == 0;
        e.category = word() + "-" + word();
        e.cot = word() + " " + word() + " " + word();

        std::optional<std::tuple<bool, std::string, std::string>> reference;
        for (const auto& order : universe) {
            std::vector<std::pair<TargetComponent, std::string>> targets;
            for (TargetComponent c : order) {
                targets.emplace_back(c, render_target_component(c, e));
            }
            const auto verdict = parse_guard_output(render_target_text(targets));
            const auto triple = std::make_tuple(verdict.label, verdict.category.value_or(""),
                                                verdict.cot.value_or(""));
            if (!reference) {
                reference = triple;
                CHECK(verdict.label == e.label);
                CHECK(verdict.category.value_or("") == *e.category);
                CHECK(verdict.cot.value_or("") == *e.cot);
            } else {
                CHECK(triple == *reference);
            }
        }
    }
}

TEST_CASE("classify builds level-appropriate chats and parses the answer") {
    std::shared_ptr<ScriptedEndpoint> endpoint;
    auto make_gateway = [&](const char* script) {
        endpoint = std::make_shared<ScriptedEndpoint>(MockScript::from_json(json::parse(script)));
        return Gateway(endpoint);
    };

    SUBCASE("prompt level, canonical order") {
        Gateway gateway = make_gateway(
            R"({"responses": [{"completion": "[LABEL] unsafe [CATEGORY] profanity"}]})");
        const auto verdict = classify(gateway, prompt_record("r1", "some prompt", true),
                                      tiny_policy(), load_classify_templates(), guard_profile());
        CHECK(verdict.label == true);
        CHECK(verdict.category == "profanity");
        const auto request = endpoint->script().request_at(0);
        CHECK(request["messages"].size() == 2);
        CHECK(request["messages"][0]["role"] == "system");
        const std::string system = request["messages"][0]["content"].get<std::string>();
        CHECK(system.find("<BEGIN POLICY>") != std::string::npos);
        const std::string user = request["messages"][1]["content"].get<std::string>();
        CHECK(user.find("some prompt") != std::string::npos);
        CHECK(user.find("AI Response:") == std::string::npos);
    }

    SUBCASE("response level, permuted components") {
        Gateway gateway = make_gateway(
            R"({"responses": [{"completion": "[REASONING] repeated ads [CATEGORY] spam [LABEL] unsafe"}]})");
        BenchmarkRecord record = prompt_record("r2", "the prompt", true);
        record.level = BenchLevel::Response;
        record.response = "the response";
        record.benchmark = "bench";
        const auto verdict = classify(gateway, record, tiny_policy(), load_classify_templates(),
                                      guard_profile());
        CHECK(verdict.label == true);
        CHECK(verdict.category == "spam");
        const std::string user =
            endpoint->script().request_at(0)["messages"][1]["content"].get<std::string>();
        CHECK(user.find("the response") != std::string::npos);
    }

    SUBCASE("untagged prose raises GuardParseError") {
        Gateway gateway = make_gateway(R"({"responses": [{"completion": "sounds fine to me"}]})");
        CHECK_THROWS_AS(classify(gateway, prompt_record("r3", "p", false), tiny_policy(),
                                 load_classify_templates(), guard_profile()),
                        GuardParseError);
    }
}

TEST_CASE("evaluate_benchmark scores a perfect guard at F1 = 1") {
    std::vector<BenchmarkRecord> records;
    json responses = json::array();
    for (int i = 0; i < 4; ++i) {
        const bool gold = i < 2;
        records.push_back(prompt_record("rec-" + std::to_string(i), "prompt " + std::to_string(i), gold));
        responses.push_back(json{{"completion", gold ? "[LABEL] unsafe" : "[LABEL] safe"}});
    }
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json{{"responses", responses}})));
    const auto result = evaluate_benchmark(gateway, records, tiny_policy(),
                                           load_classify_templates(), guard_profile(), 1);
    CHECK(*result.report.f1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.report.counts.tp == 2);
    CHECK(result.report.counts.tn == 2);
    CHECK(result.report.parse_failures == 0);
}

TEST_CASE("evaluate_benchmark reproduces the hand-computed confusion matrix") {
    // gold [+,+,-,-], guard [+,-,+,-]
    std::vector<BenchmarkRecord> records{
        prompt_record("rec-0", "p0", true),
        prompt_record("rec-1", "p1", true),
        prompt_record("rec-2", "p2", false),
        prompt_record("rec-3", "p3", false),
    };
    json responses = json::array();
    for (const char* answer : {"[LABEL] unsafe", "[LABEL] safe", "[LABEL] unsafe", "[LABEL] safe"}) {
        responses.push_back(json{{"completion", answer}});
    }
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json{{"responses", responses}})));
    const auto result = evaluate_benchmark(gateway, records, tiny_policy(),
                                           load_classify_templates(), guard_profile(), 1);
    CHECK(result.report.counts.tp == 1);
    CHECK(result.report.counts.fn == 1);
    CHECK(result.report.counts.fp == 1);
    CHECK(result.report.counts.tn == 1);
    CHECK(*result.report.f1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("randomized verdicts match the brute-force confusion oracle exactly") {
    std::mt19937_64 rng(20240807);
    const int n = 2000;
    std::vector<BenchmarkRecord> records;
    json responses = json::array();
    long otp = 0, ofp = 0, ofn = 0, otn = 0;  // brute-force oracle counts
    for (int i = 0; i < n; ++i) {
        const bool gold = rng() % 2 == 0;
        const bool predicted = rng() % 2 == 0;
        char id[16];
        std::snprintf(id, sizeof id, "rec-%06d", i);
        records.push_back(prompt_record(id, "prompt " + std::to_string(i), gold));
        responses.push_back(json{{"completion", predicted ? "[LABEL] unsafe" : "[LABEL] safe"}});
        if (gold && predicted) ++otp;
        else if (gold && !predicted) ++ofn;
        else if (!gold && predicted) ++ofp;
        else ++otn;
    }
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json{{"responses", responses}})));
    const auto result = evaluate_benchmark(gateway, records, tiny_policy(),
                                           load_classify_templates(), guard_profile(), 1);
    CHECK(result.report.counts.tp == otp);
    CHECK(result.report.counts.fp == ofp);
    CHECK(result.report.counts.fn == ofn);
    CHECK(result.report.counts.tn == otn);
    CHECK(*result.report.precision == static_cast<double>(otp) / static_cast<double>(otp + ofp));
    CHECK(*result.report.f1 ==
          static_cast<double>(2 * otp) / static_cast<double>(2 * otp + ofp + ofn));
}

TEST_CASE("parse failures are penalized against gold and tallied separately") {
    std::vector<BenchmarkRecord> records{
        prompt_record("rec-0", "p0", true),   // failure -> FN
        prompt_record("rec-1", "p1", false),  // failure -> FP
        prompt_record("rec-2", "p2", true),   // answered correctly
    };
    json responses = json::array({json{{"completion", "no tags"}},
                                  json{{"completion", "still no tags"}},
                                  json{{"completion", "[LABEL] unsafe"}}});
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json{{"responses", responses}})));
    const auto result = evaluate_benchmark(gateway, records, tiny_policy(),
                                           load_classify_templates(), guard_profile(), 1);
    CHECK(result.report.parse_failures == 2);
    CHECK(result.report.counts.fn == 1);
    CHECK(result.report.counts.fp == 1);
    CHECK(result.report.counts.tp == 1);
    CHECK(result.report.counts.total() == 3);
    CHECK(result.failures.size() == 2);
}

TEST_CASE("transport failures are excluded from the counts but conserved") {
    std::vector<BenchmarkRecord> records{
        prompt_record("rec-0", "p0", true),
        prompt_record("rec-1", "p1", false),
    };
    json responses = json::array(
        {json{{"completion", "[LABEL] unsafe"}}, json{{"fault", "connect"}, {"repeat", -1}}});
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json{{"responses", responses}})));
    const auto result = evaluate_benchmark(gateway, records, tiny_policy(),
                                           load_classify_templates(), guard_profile(), 1);
    CHECK(result.report.transport_failures == 1);
    CHECK(result.report.counts.total() + result.report.transport_failures ==
          static_cast<long>(records.size()));
}

TEST_CASE("mixed benchmarks in one evaluation are rejected") {
    auto a = prompt_record("rec-0", "p", true);
    auto b = prompt_record("rec-1", "p", false);
    b.benchmark = "other";
    Gateway gateway(std::make_shared<ScriptedEndpoint>(
        MockScript::from_json(json::parse(R"({"responses": []})"))));
    CHECK_THROWS_AS(evaluate_benchmark(gateway, {a, b}, tiny_policy(), load_classify_templates(),
                                       guard_profile(), 1),
                    ValidationError);
}

TEST_CASE("the comparison table groups sections and formats percentages") {
    BenchReportEntry one;
    one.report = MetricsReport::from_counts("aegis-like", {0, 0, 0, 0});
    one.report.f1 = 0.919;
    one.level = BenchLevel::Prompt;

    BenchReportEntry two;
    two.report = MetricsReport::from_counts("resp-bench", {3, 1, 1, 5});
    two.level = BenchLevel::Response;

    BenchReportEntry undefined;
    undefined.report = MetricsReport::from_counts("silent-bench", {0, 0, 0, 7});
    undefined.level = BenchLevel::Response;

    const std::string table = render_report_table({one, two, undefined});
    CHECK(table.find("Prompt-based Benchmarks") != std::string::npos);
    CHECK(table.find("Response-based Benchmarks") != std::string::npos);
    CHECK(table.find("91.9%") != std::string::npos);
    CHECK(table.find("—") != std::string::npos);
    CHECK(table.find("no valid inferences") != std::string::npos);
    CHECK(table.find("Prompt-based Benchmarks") < table.find("Response-based Benchmarks"));

    const std::string empty_table = render_report_table({});
    CHECK(empty_table.find("Prompt-based Benchmarks") != std::string::npos);
    CHECK(empty_table.find("%") == std::string::npos);

    const auto records = report_entries_to_records({one, two});
    REQUIRE(records.size() == 2);
    CHECK(records[0]["level"] == "prompt");
    CHECK(records[1]["level"] == "response");
}

TEST_CASE("benchmark records round-trip and enforce level consistency") {
    BenchmarkRecord r = prompt_record("rec-1", "p", true);
    r.category = "spam";
    const json j = benchmark_record_to_json(r);
    const auto back = benchmark_record_from_json(j);
    CHECK(benchmark_record_to_json(back) == j);

    json response_level = j;
    response_level["level"] = "response";
    CHECK_THROWS_AS(benchmark_record_from_json(response_level), ValidationError);
}

TEST_CASE("adapters map third-party fields onto benchmark records") {
    BenchmarkAdapter adapter;
    adapter.benchmark = "beaver-like";
    adapter.level = BenchLevel::Response;
    adapter.prompt_field = "prompt";
    adapter.response_field = "response";
    adapter.label_field = "is_safe";
    adapter.positive_values = {json(false)};
    adapter.negative_values = {json(true)};

    const std::vector<json> raw{
        json{{"prompt", "p1"}, {"response", "r1"}, {"is_safe", false}},
        json{{"prompt", "p2"}, {"response", "r2"}, {"is_safe", true}},
        json{{"prompt", "p3"}, {"is_safe", true}},
    };
    const auto result = adapt_benchmark_records(raw, adapter);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].label == true);   // unsafe responses are the positive class
    CHECK(result.records[1].label == false);
    CHECK(result.records[0].id == "rec-000001");
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].reason == "missing_response");
}

TEST_CASE("the eval-set manifest fixture validates and perturbations fail") {
    const json doc =
        read_json_file(testutil::assets_dir() / "eval" / "robloxguard_eval_manifest.json");
    auto manifest = eval_manifest_from_json(doc);
    CHECK(manifest.total == 2872);
    CHECK(manifest.rows.size() == 23);
    long none_count = -1;
    for (const auto& row : manifest.rows) {
        if (!row.category) {
            none_count = row.count;
        }
    }
    CHECK(none_count == 1980);
    validate_eval_manifest(manifest);

    auto perturbed = manifest;
    perturbed.rows[3].count += 1;
    CHECK_THROWS_AS(validate_eval_manifest(perturbed), ValidationError);
    auto total_off = manifest;
    total_off.total -= 1;
    CHECK_THROWS_AS(validate_eval_manifest(total_off), ValidationError);
    auto duped = manifest;
    duped.rows.push_back(duped.rows[1]);
    duped.total += duped.rows[1].count;
    CHECK_THROWS_AS(validate_eval_manifest(duped), ValidationError);

    CHECK(eval_manifest_to_json(eval_manifest_from_json(doc)) ==
          eval_manifest_to_json(manifest));
}
