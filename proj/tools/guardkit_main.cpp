// guardkit: config-driven CLI over the safety-data toolkit. Subcommands map
// one-to-one onto the pipeline stages; every run writes its artifacts plus a
// machine-readable run summary into the configured output directory.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "CLI11.hpp"

#include "guardkit/config.hpp"
#include "guardkit/dataset_builder.hpp"
#include "guardkit/errors.hpp"
#include "guardkit/eval_harness.hpp"
#include "guardkit/gateway.hpp"
#include "guardkit/mock_server.hpp"
#include "guardkit/synth_pipeline.hpp"
#include "guardkit/template_engine.hpp"

namespace {

using namespace guardkit;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTransport = 3;
constexpr int kExitValidation = 4;

std::atomic<bool> g_stop{false};

void handle_signal(int) {
    g_stop = true;
}

struct CommonArgs {
    std::string config_path;
    bool dry_run = false;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> concurrency;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "toolkit config file (JSON)")->required();
    cmd->add_flag("--dry-run", args.dry_run,
                  "validate config, templates, and inputs; touch no endpoint; write nothing");
    cmd->add_option("--output-dir", args.output_dir, "override the configured output directory");
    cmd->add_option("--seed", args.seed, "override the configured seed");
    cmd->add_option("--concurrency", args.concurrency, "override the in-flight request bound");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig config = load_run_config(args.config_path);
    if (args.output_dir) {
        config.output_dir = *args.output_dir;
        config.resolved["output_dir"] = *args.output_dir;
    }
    if (args.seed) {
        config.builder.seed = *args.seed;
        config.resolved["builder"]["seed"] = *args.seed;
    }
    if (args.concurrency) {
        if (*args.concurrency < 1) {
            throw ConfigError("concurrency must be >= 1");
        }
        config.concurrency = *args.concurrency;
        config.resolved["concurrency"] = *args.concurrency;
    }
    return config;
}

std::string require_template(const std::filesystem::path& path, const std::string& name) {
    if (path.empty()) {
        throw ConfigError("config lacks templates." + name);
    }
    return load_template_file(path);
}

ClassifyTemplates load_classify_templates(const RunConfig& config) {
    ClassifyTemplates t;
    t.system_prompt =
        require_template(config.templates.classify_system_prompt, "classify_system_prompt");
    t.user_prompt = require_template(config.templates.classify_user_prompt, "classify_user_prompt");
    t.system_response =
        require_template(config.templates.classify_system_response, "classify_system_response");
    t.user_response =
        require_template(config.templates.classify_user_response, "classify_user_response");
    return t;
}

const EndpointProfile& require_endpoint(const std::optional<EndpointProfile>& profile,
                                        const std::string& role) {
    if (!profile) {
        throw ConfigError("config binds no endpoint for role: " + role);
    }
    return *profile;
}

struct SummaryClock {
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    long elapsed_ms() const {
        return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - started)
                                     .count());
    }
};

void finish_run(const RunConfig& config, RunSummary summary, const SummaryClock& clock) {
    summary.config_hash = config_hash(config);
    summary.duration_ms = clock.elapsed_ms();
    std::filesystem::create_directories(config.output_dir);
    write_run_summary(config.output_dir, summary);
}

std::vector<json> failures_to_records(const std::vector<StageFailure>& failures) {
    std::vector<json> records;
    records.reserve(failures.size());
    for (const auto& f : failures) {
        records.push_back(failure_to_json(f));
    }
    return records;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const CommonArgs& args, int per_category_flag, int budget_flag) {
    const RunConfig config = load_config(args);
    const auto policy = load_policy_file(config.policy_path);
    const std::string tmpl = require_template(config.templates.generation, "generation");
    const auto& generator = require_endpoint(config.prompt_generator, "prompt_generator");
    if (args.dry_run) {
        std::cout << "dry run ok: generate\n";
        return kExitOk;
    }
    SummaryClock clock;
    GenerateOptions options;
    options.per_category = per_category_flag > 0 ? per_category_flag : config.per_category;
    options.attempt_budget = budget_flag > 0 ? budget_flag : config.attempt_budget;

    Gateway gateway;
    const auto result = generate_scenarios(gateway, policy, tmpl, generator, options);

    std::filesystem::create_directories(config.output_dir);
    std::vector<json> records;
    for (const auto& s : result.scenarios) {
        records.push_back(scenario_to_json(s));
    }
    const auto scenarios_path = config.output_dir / "scenarios.jsonl";
    const auto failures_path = config.output_dir / "generate_failures.jsonl";
    write_jsonl(scenarios_path, records);
    write_jsonl(failures_path, failures_to_records(result.failures));

    RunSummary summary;
    summary.subcommand = "generate";
    summary.inputs = {config.policy_path.string(), config.templates.generation.string()};
    summary.outputs = {scenarios_path.string(), failures_path.string()};
    summary.counts = json{{"scenarios", result.scenarios.size()},
                          {"objects_seen", result.objects_seen},
                          {"malformed_skipped", result.malformed_skipped},
                          {"duplicates_dropped", result.duplicates_dropped},
                          {"completions_requested", result.completions_requested},
                          {"failures", result.failures.size()}};
    finish_run(config, summary, clock);
    std::cout << "generated " << result.scenarios.size() << " scenario(s), skipped "
              << result.malformed_skipped << " malformed object(s)\n";
    return kExitOk;
}

// ----------------------------------------------------------------- respond

int cmd_respond(const CommonArgs& args, const std::string& scenarios_flag, int per_scenario_flag) {
    const RunConfig config = load_config(args);
    if (config.response_generators.empty()) {
        throw ConfigError("config binds no endpoint for role: response_generator");
    }
    const std::filesystem::path scenarios_path =
        scenarios_flag.empty() ? config.output_dir / "scenarios.jsonl"
                               : std::filesystem::path(scenarios_flag);
    if (args.dry_run) {
        read_jsonl(scenarios_path);
        std::cout << "dry run ok: respond\n";
        return kExitOk;
    }
    SummaryClock clock;
    std::vector<AdversarialScenario> scenarios;
    for (const auto& r : read_jsonl(scenarios_path)) {
        scenarios.push_back(scenario_from_json(r));
    }
    const int per_scenario = per_scenario_flag > 0 ? per_scenario_flag : config.per_scenario;

    Gateway gateway;
    const auto result = generate_responses(gateway, scenarios, config.response_generators,
                                           per_scenario, config.concurrency);

    std::filesystem::create_directories(config.output_dir);
    std::vector<json> records;
    for (const auto& r : result.responses) {
        records.push_back(response_to_json(r));
    }
    const auto responses_path = config.output_dir / "responses.jsonl";
    const auto failures_path = config.output_dir / "respond_failures.jsonl";
    write_jsonl(responses_path, records);
    write_jsonl(failures_path, failures_to_records(result.failures));

    RunSummary summary;
    summary.subcommand = "respond";
    summary.inputs = {scenarios_path.string()};
    summary.outputs = {responses_path.string(), failures_path.string()};
    summary.counts = json{{"scenarios", scenarios.size()},
                          {"slots", result.slots},
                          {"responses", result.responses.size()},
                          {"failures", result.failures.size()}};
    finish_run(config, summary, clock);
    std::cout << "collected " << result.responses.size() << " response(s) over " << result.slots
              << " slot(s)\n";
    return kExitOk;
}

// ------------------------------------------------------------------- judge

int cmd_judge(const CommonArgs& args, const std::string& scenarios_flag,
              const std::string& responses_flag) {
    const RunConfig config = load_config(args);
    const auto policy = load_policy_file(config.policy_path);
    const std::string tmpl = require_template(config.templates.validation, "validation");
    const auto& judge = require_endpoint(config.judge, "judge");
    const std::filesystem::path scenarios_path =
        scenarios_flag.empty() ? config.output_dir / "scenarios.jsonl"
                               : std::filesystem::path(scenarios_flag);
    const std::filesystem::path responses_path =
        responses_flag.empty() ? config.output_dir / "responses.jsonl"
                               : std::filesystem::path(responses_flag);
    if (args.dry_run) {
        read_jsonl(scenarios_path);
        read_jsonl(responses_path);
        std::cout << "dry run ok: judge\n";
        return kExitOk;
    }
    SummaryClock clock;
    std::map<std::string, AdversarialScenario> scenarios;
    for (const auto& r : read_jsonl(scenarios_path)) {
        auto s = scenario_from_json(r);
        scenarios.emplace(s.scenario_id, std::move(s));
    }
    std::vector<std::pair<AdversarialScenario, GeneratedResponse>> pairs;
    std::vector<StageFailure> orphan_failures;
    for (const auto& r : read_jsonl(responses_path)) {
        auto response = response_from_json(r);
        const auto it = scenarios.find(response.scenario_id);
        if (it == scenarios.end()) {
            orphan_failures.push_back(
                {"judge", response.scenario_id, "orphan_response", "no scenario with this id"});
            continue;
        }
        pairs.emplace_back(it->second, std::move(response));
    }

    Gateway gateway;
    auto result = judge_pairs(gateway, pairs, policy, tmpl, judge, config.concurrency);
    result.failures.insert(result.failures.end(), orphan_failures.begin(), orphan_failures.end());

    std::filesystem::create_directories(config.output_dir);
    std::vector<json> records;
    for (const auto& p : result.judged) {
        records.push_back(judged_to_json(p));
    }
    const auto judged_path = config.output_dir / "judged.jsonl";
    const auto failures_path = config.output_dir / "judge_failures.jsonl";
    write_jsonl(judged_path, records);
    write_jsonl(failures_path, failures_to_records(result.failures));

    RunSummary summary;
    summary.subcommand = "judge";
    summary.inputs = {scenarios_path.string(), responses_path.string(),
                      config.policy_path.string()};
    summary.outputs = {judged_path.string(), failures_path.string()};
    summary.counts = json{{"pairs", pairs.size()},
                          {"judged", result.judged.size()},
                          {"failures", result.failures.size()}};
    finish_run(config, summary, clock);
    long violations = 0;
    for (const auto& p : result.judged) {
        if (p.verdict.violation) {
            ++violations;
        }
    }
    std::cout << "judged " << result.judged.size() << " pair(s), " << violations
              << " violation(s)\n";
    return kExitOk;
}

// --------------------------------------------------------------- calibrate

int cmd_calibrate(const CommonArgs& args, const std::string& judged_flag,
                  const std::string& gold_flag) {
    const RunConfig config = load_config(args);
    const std::filesystem::path judged_path = judged_flag.empty()
                                                  ? config.output_dir / "judged.jsonl"
                                                  : std::filesystem::path(judged_flag);
    if (args.dry_run) {
        read_jsonl(judged_path);
        read_jsonl(gold_flag);
        std::cout << "dry run ok: calibrate\n";
        return kExitOk;
    }
    SummaryClock clock;
    std::vector<JudgedPair> judged;
    for (const auto& r : read_jsonl(judged_path)) {
        judged.push_back(judged_from_json(r));
    }
    std::map<std::string, bool> gold;
    for (const auto& r : read_jsonl(gold_flag)) {
        gold[r.at("scenario_id").get<std::string>()] = r.at("label").get<bool>();
    }
    const auto report = calibrate_judge(judged, gold);

    std::filesystem::create_directories(config.output_dir);
    const auto report_path = config.output_dir / "calibration.json";
    write_json_file(report_path, calibration_to_json(report));

    RunSummary summary;
    summary.subcommand = "calibrate";
    summary.inputs = {judged_path.string(), gold_flag};
    summary.outputs = {report_path.string()};
    summary.counts = json{{"judged", judged.size()},
                          {"tp", report.counts.tp},
                          {"fp", report.counts.fp},
                          {"fn", report.counts.fn},
                          {"tn", report.counts.tn}};
    finish_run(config, summary, clock);
    std::cout << format_calibration_summary(report) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------ build-dataset

int cmd_build_dataset(const CommonArgs& args, const std::string& sources_flag, bool no_cot,
                      bool no_inversion, bool no_synthetic, bool do_attach_cot,
                      double val_fraction_flag) {
    const RunConfig config = load_config(args);
    const auto sources = load_sources_manifest(sources_flag);

    BuildOptions options;
    options.inversion = config.builder.inversion && !no_inversion;
    options.use_cot = config.builder.use_cot && !no_cot;
    options.include_synthetic = config.builder.include_synthetic && !no_synthetic;
    options.seed = config.builder.seed;
    options.val_fraction =
        val_fraction_flag >= 0.0 ? val_fraction_flag : config.builder.val_fraction;
    options.templates = load_classify_templates(config);
    if (args.dry_run) {
        if (do_attach_cot) {
            require_template(config.templates.cot, "cot");
            require_endpoint(config.prompt_generator, "prompt_generator");
        }
        std::cout << "dry run ok: build-dataset (" << sources.size() << " source(s))\n";
        return kExitOk;
    }
    SummaryClock clock;

    Gateway gateway;
    long attached = 0;
    long cot_failures = 0;
    std::vector<std::pair<SourceManifest, std::vector<LabeledExample>>> loaded;
    std::vector<StageFailure> failures;
    for (const auto& source : sources) {
        if (!options.include_synthetic && source.synthetic) {
            continue;
        }
        IngestResult ingested = ingest_source(source);
        failures.insert(failures.end(), ingested.failures.begin(), ingested.failures.end());
        std::vector<LabeledExample> examples = std::move(ingested.examples);
        if (do_attach_cot && source.cot_coverage > 0.0) {
            const std::string cot_tmpl = require_template(config.templates.cot, "cot");
            const auto& generator = require_endpoint(config.prompt_generator, "prompt_generator");
            auto result = attach_cot(gateway, std::move(examples), source.taxonomy, cot_tmpl,
                                     generator, source.cot_coverage, options.seed,
                                     config.concurrency);
            attached += result.attached;
            cot_failures += result.failed;
            examples = std::move(result.examples);
        }
        loaded.emplace_back(source, std::move(examples));
    }
    if (loaded.empty()) {
        throw EmptyCorpus("no sources left after filtering");
    }

    BuildResult result = build_instruction_set(loaded, options);
    result.failures.insert(result.failures.begin(), failures.begin(), failures.end());

    std::filesystem::create_directories(config.output_dir);
    const auto corpus_path = config.output_dir / "corpus.jsonl";
    const auto stats_path = config.output_dir / "mix_stats.json";
    const auto failures_path = config.output_dir / "build_failures.jsonl";
    std::vector<json> records;
    for (const auto& e : result.corpus) {
        records.push_back(instruction_to_json(e));
    }
    write_jsonl(corpus_path, records);
    std::vector<std::string> outputs{corpus_path.string(), stats_path.string(),
                                     failures_path.string()};
    if (!result.validation.empty()) {
        std::vector<json> val_records;
        for (const auto& e : result.validation) {
            val_records.push_back(instruction_to_json(e));
        }
        const auto val_path = config.output_dir / "corpus_val.jsonl";
        write_jsonl(val_path, val_records);
        outputs.push_back(val_path.string());
    }
    write_json_file(stats_path, mix_stats_to_json(result.stats));
    write_jsonl(failures_path, failures_to_records(result.failures));

    RunSummary summary;
    summary.subcommand = "build-dataset";
    summary.inputs = {sources_flag};
    summary.outputs = outputs;
    summary.counts = json{{"examples", result.corpus.size()},
                          {"validation", result.validation.size()},
                          {"failures", result.failures.size()},
                          {"cot_attached", attached},
                          {"cot_failures", cot_failures}};
    finish_run(config, summary, clock);
    std::cout << render_mix_stats_table(result.stats);
    return kExitOk;
}

// ------------------------------------------------------------------- stats

int cmd_stats(const CommonArgs& args, const std::string& corpus_flag,
              const std::string& validate_flag, const std::string& out_flag) {
    const RunConfig config = load_config(args);
    if (corpus_flag.empty() == validate_flag.empty()) {
        throw ConfigError("stats needs exactly one of --corpus or --validate");
    }
    if (args.dry_run) {
        std::cout << "dry run ok: stats\n";
        return kExitOk;
    }
    SummaryClock clock;
    RunSummary summary;
    summary.subcommand = "stats";
    if (!validate_flag.empty()) {
        const auto stats = mix_stats_from_json(read_json_file(validate_flag));
        validate_mix_stats(stats);
        std::cout << "stats file is internally consistent\n";
        summary.inputs = {validate_flag};
        summary.counts = json{{"rows", stats.rows.size()}, {"total", stats.grand.total}};
        finish_run(config, summary, clock);
        return kExitOk;
    }
    std::vector<InstructionExample> examples;
    for (const auto& r : read_jsonl(corpus_flag)) {
        examples.push_back(instruction_from_json(r));
    }
    const auto stats = compute_mix_stats(examples);
    validate_mix_stats(stats);
    std::cout << render_mix_stats_table(stats);
    summary.inputs = {corpus_flag};
    summary.counts = json{{"examples", examples.size()}, {"total", stats.grand.total}};
    if (!out_flag.empty()) {
        write_json_file(out_flag, mix_stats_to_json(stats));
        summary.outputs = {out_flag};
    }
    finish_run(config, summary, clock);
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const CommonArgs& args, const std::vector<std::string>& records_flags,
                 const std::vector<std::string>& adapter_flags, const std::string& report_flag) {
    const RunConfig config = load_config(args);
    const auto policy = load_policy_file(config.policy_path);
    const auto templates = load_classify_templates(config);
    const auto& guard = require_endpoint(config.guard, "guard");
    if (records_flags.empty()) {
        throw ConfigError("evaluate needs at least one --records file");
    }
    if (!adapter_flags.empty() && adapter_flags.size() != records_flags.size()) {
        throw ConfigError("--adapter must be given once per --records file, or not at all");
    }
    if (args.dry_run) {
        for (const auto& f : records_flags) {
            read_jsonl(f);
        }
        for (const auto& f : adapter_flags) {
            load_benchmark_adapter(f);
        }
        std::cout << "dry run ok: evaluate\n";
        return kExitOk;
    }
    SummaryClock clock;

    Gateway gateway;
    std::vector<BenchReportEntry> entries;
    std::vector<json> category_rows;
    std::vector<json> failure_records;
    long total_records = 0;
    for (std::size_t i = 0; i < records_flags.size(); ++i) {
        std::vector<BenchmarkRecord> records;
        if (!adapter_flags.empty()) {
            const auto adapter = load_benchmark_adapter(adapter_flags[i]);
            auto adapted = adapt_benchmark_records(read_jsonl(records_flags[i]), adapter);
            for (const auto& f : adapted.failures) {
                failure_records.push_back(failure_to_json(f));
            }
            records = std::move(adapted.records);
        } else {
            for (const auto& r : read_jsonl(records_flags[i])) {
                records.push_back(benchmark_record_from_json(r));
            }
        }
        if (records.empty()) {
            continue;
        }
        const BenchLevel level = records.front().level;
        auto result =
            evaluate_benchmark(gateway, records, policy, templates, guard, config.concurrency);
        total_records += static_cast<long>(records.size());
        for (const auto& f : result.failures) {
            failure_records.push_back(failure_to_json(f));
        }
        for (const auto& row : result.category_breakdown) {
            category_rows.push_back(json{{"benchmark", result.report.benchmark},
                                         {"category", row.category},
                                         {"records", row.records},
                                         {"correct", row.correct}});
        }
        entries.push_back({std::move(result.report), level});
    }

    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path report_path = report_flag.empty()
                                                  ? config.output_dir / "eval_report.jsonl"
                                                  : std::filesystem::path(report_flag);
    const auto categories_path = config.output_dir / "eval_categories.jsonl";
    const auto failures_path = config.output_dir / "eval_failures.jsonl";
    write_jsonl(report_path, report_entries_to_records(entries));
    write_jsonl(categories_path, category_rows);
    write_jsonl(failures_path, failure_records);

    RunSummary summary;
    summary.subcommand = "evaluate";
    summary.inputs = records_flags;
    summary.outputs = {report_path.string(), categories_path.string(), failures_path.string()};
    summary.counts = json{{"benchmarks", entries.size()},
                          {"records", total_records},
                          {"failures", failure_records.size()}};
    finish_run(config, summary, clock);
    std::cout << render_report_table(entries);
    return kExitOk;
}

// ------------------------------------------------------------ bench-latency

int cmd_bench_latency(const CommonArgs& args, int runs_flag, const std::string& payload_flag) {
    const RunConfig config = load_config(args);
    const auto& guard = require_endpoint(config.guard, "guard");
    if (args.dry_run) {
        if (!payload_flag.empty()) {
            read_jsonl(payload_flag);
        }
        std::cout << "dry run ok: bench-latency\n";
        return kExitOk;
    }
    SummaryClock clock;
    std::vector<ChatMessage> payload;
    if (!payload_flag.empty()) {
        for (const auto& r : read_jsonl(payload_flag)) {
            payload.push_back(
                {r.at("role").get<std::string>(), r.at("content").get<std::string>()});
        }
    } else {
        payload = {{"user", "Classify this message for policy violations."}};
    }
    const int runs = runs_flag > 0 ? runs_flag : config.bench_runs;

    Gateway gateway;
    const auto report = gateway.run_latency_bench(guard, payload, runs);

    std::filesystem::create_directories(config.output_dir);
    const auto report_path = config.output_dir / "latency.json";
    write_json_file(report_path, latency_report_to_json(report));

    RunSummary summary;
    summary.subcommand = "bench-latency";
    if (!payload_flag.empty()) {
        summary.inputs = {payload_flag};
    }
    summary.outputs = {report_path.string()};
    summary.counts = json{{"runs", report.runs}};
    finish_run(config, summary, clock);
    std::cout << format_latency_line(report) << "\n";
    return kExitOk;
}

// ----------------------------------------------------- emit-train-manifest

int cmd_emit_train_manifest(const CommonArgs& args, const std::string& stats_flag,
                            const std::vector<std::string>& corpus_flags,
                            const std::string& out_flag, std::optional<int> rank,
                            std::optional<int> epochs, std::optional<double> learning_rate,
                            std::optional<int> batch_size, std::optional<double> warmup_ratio,
                            std::optional<int> context_length,
                            std::optional<std::string> precision) {
    const RunConfig config = load_config(args);
    if (args.dry_run) {
        if (!stats_flag.empty()) {
            read_json_file(stats_flag);
        }
        std::cout << "dry run ok: emit-train-manifest\n";
        return kExitOk;
    }
    SummaryClock clock;
    MixStats stats;
    if (!stats_flag.empty()) {
        stats = mix_stats_from_json(read_json_file(stats_flag));
        validate_mix_stats(stats);
    }
    TrainManifest manifest = emit_train_manifest(stats, corpus_flags);
    if (rank) manifest.lora_rank = *rank;
    if (epochs) manifest.epochs = *epochs;
    if (learning_rate) manifest.learning_rate = *learning_rate;
    if (batch_size) manifest.per_device_batch_size = *batch_size;
    if (warmup_ratio) manifest.warmup_ratio = *warmup_ratio;
    if (context_length) manifest.context_length = *context_length;
    if (precision) manifest.precision = *precision;

    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path out_path = out_flag.empty()
                                               ? config.output_dir / "train_manifest.json"
                                               : std::filesystem::path(out_flag);
    write_json_file(out_path, train_manifest_to_json(manifest));

    RunSummary summary;
    summary.subcommand = "emit-train-manifest";
    if (!stats_flag.empty()) {
        summary.inputs = {stats_flag};
    }
    summary.outputs = {out_path.string()};
    summary.counts = json{{"corpus_files", corpus_flags.size()}};
    finish_run(config, summary, clock);
    std::cout << "wrote " << out_path.string() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------- adjudicate

int cmd_adjudicate(const CommonArgs& args, const std::string& items_flag,
                   const std::string& votes_flag, const std::string& out_flag) {
    const RunConfig config = load_config(args);
    if (args.dry_run) {
        read_jsonl(items_flag);
        read_jsonl(votes_flag);
        std::cout << "dry run ok: adjudicate\n";
        return kExitOk;
    }
    SummaryClock clock;
    std::map<std::string, std::vector<ExpertVote>> votes_by_record;
    for (const auto& r : read_jsonl(votes_flag)) {
        auto vote = expert_vote_from_json(r);
        votes_by_record[vote.record_id].push_back(std::move(vote));
    }
    std::vector<json> out_records;
    std::vector<json> rejected;
    long adjudicated_count = 0;
    for (const auto& r : read_jsonl(items_flag)) {
        BenchmarkRecord record;
        record.id = r.at("id").get<std::string>();
        record.prompt = r.at("prompt").get<std::string>();
        record.benchmark = r.value("benchmark", "adjudicated");
        record.level = bench_level_from_name(r.value("level", "prompt"));
        if (r.contains("response") && r["response"].is_string()) {
            record.response = r["response"].get<std::string>();
        }
        const auto it = votes_by_record.find(record.id);
        try {
            if (it == votes_by_record.end()) {
                throw MalformedVotes("no votes for record " + record.id);
            }
            const auto decision = adjudicate(it->second);
            record.label = decision.label;
            record.category = decision.category;
            out_records.push_back(benchmark_record_to_json(record));
            ++adjudicated_count;
        } catch (const MalformedVotes& e) {
            rejected.push_back(
                failure_to_json({"adjudicate", record.id, "malformed_votes", e.what()}));
        }
    }

    std::filesystem::create_directories(config.output_dir);
    const std::filesystem::path out_path = out_flag.empty()
                                               ? config.output_dir / "adjudicated.jsonl"
                                               : std::filesystem::path(out_flag);
    const auto rejected_path = config.output_dir / "adjudicate_failures.jsonl";
    write_jsonl(out_path, out_records);
    write_jsonl(rejected_path, rejected);

    RunSummary summary;
    summary.subcommand = "adjudicate";
    summary.inputs = {items_flag, votes_flag};
    summary.outputs = {out_path.string(), rejected_path.string()};
    summary.counts = json{{"adjudicated", adjudicated_count}, {"rejected", rejected.size()}};
    finish_run(config, summary, clock);
    std::cout << "adjudicated " << adjudicated_count << " record(s), rejected " << rejected.size()
              << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- mock-serve

int cmd_mock_serve(const std::string& script_flag, const std::string& host, int port) {
    MockServer server(MockScript::load(script_flag), host, port);
    std::cout << "test double listening at " << server.base_url()
              << " (chat-completions protocol); Ctrl-C to stop\n";
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    return kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const EndpointError& e) {
        std::cerr << "endpoint error: " << e.what() << "\n";
        return kExitTransport;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const json::exception& e) {
        // malformed fields inside an otherwise well-formed record file
        std::cerr << "record error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitOther;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "guardkit: synthetic safety-data pipeline, dataset builder, and guard evaluation harness"};
    app.require_subcommand(1);

    CommonArgs generate_args;
    int per_category = 0;
    int budget = 0;
    auto* generate =
        app.add_subcommand("generate", "stage 1: generate adversarial scenarios per category");
    add_common(generate, generate_args);
    generate->add_option("--per-category", per_category, "valid scenarios required per category");
    generate->add_option("--budget", budget, "max completion requests per category");

    CommonArgs respond_args;
    std::string respond_scenarios;
    int per_scenario = 0;
    auto* respond =
        app.add_subcommand("respond", "stage 2: collect responses from the responder pool");
    add_common(respond, respond_args);
    respond->add_option("--scenarios", respond_scenarios, "scenarios record file");
    respond->add_option("--per-scenario", per_scenario, "responses to collect per scenario");

    CommonArgs judge_args;
    std::string judge_scenarios;
    std::string judge_responses;
    auto* judge =
        app.add_subcommand("judge", "stage 3: label prompt-response pairs with the judge");
    add_common(judge, judge_args);
    judge->add_option("--scenarios", judge_scenarios, "scenarios record file");
    judge->add_option("--responses", judge_responses, "responses record file");

    CommonArgs calibrate_args;
    std::string calibrate_judged;
    std::string calibrate_gold;
    auto* calibrate = app.add_subcommand("calibrate", "score judged pairs against gold labels");
    add_common(calibrate, calibrate_args);
    calibrate->add_option("--judged", calibrate_judged, "judged record file");
    calibrate->add_option("--gold", calibrate_gold, "gold labels record file")->required();

    CommonArgs build_args;
    std::string build_sources;
    bool no_cot = false;
    bool no_inversion = false;
    bool no_synthetic = false;
    bool attach_cot_flag = false;
    double val_fraction = -1.0;
    auto* build = app.add_subcommand("build-dataset",
                                     "assemble the instruction corpus from the sources manifest");
    add_common(build, build_args);
    build->add_option("--sources", build_sources, "sources manifest (JSON)")->required();
    build->add_flag("--no-cot", no_cot, "drop CoT components from every target");
    build->add_flag("--no-inversion", no_inversion,
                    "use the fixed component order for every example");
    build->add_flag("--no-synthetic", no_synthetic, "exclude sources marked synthetic");
    build->add_flag("--attach-cot", attach_cot_flag, "backfill CoT rationales per source coverage");
    build->add_option("--val-fraction", val_fraction, "seeded validation split fraction");

    CommonArgs stats_args;
    std::string stats_corpus;
    std::string stats_validate;
    std::string stats_out;
    auto* stats = app.add_subcommand("stats", "compute or validate corpus mix statistics");
    add_common(stats, stats_args);
    stats->add_option("--corpus", stats_corpus, "instruction corpus record file");
    stats->add_option("--validate", stats_validate,
                      "stats document to check for internal consistency");
    stats->add_option("--out", stats_out, "write the computed stats document here");

    CommonArgs evaluate_args;
    std::vector<std::string> eval_records;
    std::vector<std::string> eval_adapters;
    std::string eval_report;
    auto* evaluate = app.add_subcommand("evaluate", "run the guard endpoint over benchmark records");
    add_common(evaluate, evaluate_args);
    evaluate->add_option("--records", eval_records, "benchmark record file (repeatable)");
    evaluate->add_option("--adapter", eval_adapters, "adapter config per records file (repeatable)");
    evaluate->add_option("--report", eval_report, "machine report output path");

    CommonArgs bench_args;
    int bench_runs = 0;
    std::string bench_payload;
    auto* bench = app.add_subcommand("bench-latency",
                                     "sequential latency benchmark against the guard endpoint");
    add_common(bench, bench_args);
    bench->add_option("--runs", bench_runs, "number of sequential runs");
    bench->add_option("--payload", bench_payload, "chat messages record file for the probe");

    CommonArgs manifest_args;
    std::string manifest_stats;
    std::vector<std::string> manifest_corpus;
    std::string manifest_out;
    std::optional<int> opt_rank;
    std::optional<int> opt_epochs;
    std::optional<double> opt_lr;
    std::optional<int> opt_batch;
    std::optional<double> opt_warmup;
    std::optional<int> opt_context;
    std::optional<std::string> opt_precision;
    auto* manifest = app.add_subcommand("emit-train-manifest",
                                        "write the manifest consumed by external trainers");
    add_common(manifest, manifest_args);
    manifest->add_option("--stats", manifest_stats, "mix stats document to embed");
    manifest->add_option("--corpus", manifest_corpus, "corpus file path(s) to list");
    manifest->add_option("--out", manifest_out, "manifest output path");
    manifest->add_option("--rank", opt_rank, "adapter rank override");
    manifest->add_option("--epochs", opt_epochs, "epoch override");
    manifest->add_option("--learning-rate", opt_lr, "learning rate override");
    manifest->add_option("--batch-size", opt_batch, "per-device batch size override");
    manifest->add_option("--warmup-ratio", opt_warmup, "warmup ratio override");
    manifest->add_option("--context-length", opt_context, "context length override");
    manifest->add_option("--precision", opt_precision, "precision override");

    CommonArgs adjudicate_args;
    std::string adjudicate_items;
    std::string adjudicate_votes;
    std::string adjudicate_out;
    auto* adjudicate_cmd =
        app.add_subcommand("adjudicate", "apply 2-of-3 expert vote adjudication to eval items");
    add_common(adjudicate_cmd, adjudicate_args);
    adjudicate_cmd->add_option("--items", adjudicate_items, "unlabeled item record file")
        ->required();
    adjudicate_cmd->add_option("--votes", adjudicate_votes, "expert vote record file")->required();
    adjudicate_cmd->add_option("--out", adjudicate_out, "adjudicated records output path");

    std::string serve_script;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8089;
    auto* serve =
        app.add_subcommand("mock-serve", "run the bundled test-double endpoint standalone");
    serve->add_option("--script", serve_script, "mock script file")->required();
    serve->add_option("--host", serve_host, "bind host");
    serve->add_option("--port", serve_port, "bind port");

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) {
        return guarded([&] { return cmd_generate(generate_args, per_category, budget); });
    }
    if (respond->parsed()) {
        return guarded([&] { return cmd_respond(respond_args, respond_scenarios, per_scenario); });
    }
    if (judge->parsed()) {
        return guarded([&] { return cmd_judge(judge_args, judge_scenarios, judge_responses); });
    }
    if (calibrate->parsed()) {
        return guarded(
            [&] { return cmd_calibrate(calibrate_args, calibrate_judged, calibrate_gold); });
    }
    if (build->parsed()) {
        return guarded([&] {
            return cmd_build_dataset(build_args, build_sources, no_cot, no_inversion, no_synthetic,
                                     attach_cot_flag, val_fraction);
        });
    }
    if (stats->parsed()) {
        return guarded(
            [&] { return cmd_stats(stats_args, stats_corpus, stats_validate, stats_out); });
    }
    if (evaluate->parsed()) {
        return guarded(
            [&] { return cmd_evaluate(evaluate_args, eval_records, eval_adapters, eval_report); });
    }
    if (bench->parsed()) {
        return guarded([&] { return cmd_bench_latency(bench_args, bench_runs, bench_payload); });
    }
    if (manifest->parsed()) {
        return guarded([&] {
            return cmd_emit_train_manifest(manifest_args, manifest_stats, manifest_corpus,
                                           manifest_out, opt_rank, opt_epochs, opt_lr, opt_batch,
                                           opt_warmup, opt_context, opt_precision);
        });
    }
    if (adjudicate_cmd->parsed()) {
        return guarded([&] {
            return cmd_adjudicate(adjudicate_args, adjudicate_items, adjudicate_votes,
                                  adjudicate_out);
        });
    }
    if (serve->parsed()) {
        return guarded([&] { return cmd_mock_serve(serve_script, serve_host, serve_port); });
    }
    return kExitOther;
}
