#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "guardkit/gateway.hpp"
#include "guardkit/jsonl.hpp"

namespace guardkit {

struct TemplatePaths {
    std::filesystem::path generation;        // stage 1
    std::filesystem::path validation;        // stage 3
    std::filesystem::path cot;               // rationale backfill
    std::filesystem::path classify_system_prompt;
    std::filesystem::path classify_user_prompt;
    std::filesystem::path classify_system_response;
    std::filesystem::path classify_user_response;
};

struct BuilderConfig {
    bool inversion = true;
    bool use_cot = true;
    bool include_synthetic = true;
    std::uint64_t seed = 0;
    double val_fraction = 0.0;
};

// Resolved toolkit configuration. Secrets never live here: endpoint profiles
// carry only the *name* of the environment variable holding the API key.
struct RunConfig {
    std::filesystem::path config_path;
    std::filesystem::path policy_path;
    TemplatePaths templates;
    std::optional<EndpointProfile> prompt_generator;
    std::vector<EndpointProfile> response_generators;
    std::optional<EndpointProfile> judge;
    std::optional<EndpointProfile> guard;
    BuilderConfig builder;
    int concurrency = 1;  // in-flight bound per endpoint
    std::filesystem::path output_dir = "out";
    int per_category = 1;
    int attempt_budget = 8;
    int per_scenario = 1;
    int bench_runs = 10;

    json resolved;  // canonical form the config hash is computed from
};

RunConfig load_run_config(const std::filesystem::path& path);

std::string config_hash(const RunConfig& config);

struct RunSummary {
    std::string subcommand;
    std::string config_hash;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json counts = json::object();
    long duration_ms = 0;
};

json run_summary_to_json(const RunSummary& s);
void write_run_summary(const std::filesystem::path& output_dir, const RunSummary& s);

}  // namespace guardkit
