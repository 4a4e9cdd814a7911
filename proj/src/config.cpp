#include "guardkit/config.hpp"

#include "guardkit/errors.hpp"
#include "guardkit/hash.hpp"

namespace guardkit {

namespace {

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
}

EndpointProfile endpoint_from_json(const json& j, const std::string& role,
                                   double default_temperature) {
    if (!j.is_object()) {
        throw ConfigError("endpoint profile for " + role + " must be an object");
    }
    EndpointProfile p;
    p.base_url = j.value("base_url", "");
    p.model = j.value("model", "");
    p.temperature = j.value("temperature", default_temperature);
    p.top_p = j.value("top_p", 1.0);
    p.max_tokens = j.value("max_tokens", 1024);
    p.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000L));
    p.retry.max_attempts = j.value("max_attempts", 3);
    p.retry.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", 250L));
    p.api_key_env = j.value("api_key_env", "");
    try {
        validate_endpoint(p);
    } catch (const ConfigError& e) {
        throw ConfigError(role + ": " + e.what());
    }
    return p;
}

json endpoint_to_resolved_json(const EndpointProfile& p) {
    return json{{"base_url", p.base_url},
                {"model", p.model},
                {"temperature", p.temperature},
                {"top_p", p.top_p},
                {"max_tokens", p.max_tokens},
                {"timeout_ms", p.timeout.count()},
                {"max_attempts", p.retry.max_attempts},
                {"backoff_ms", p.retry.backoff_base.count()},
                {"api_key_env", p.api_key_env}};
}

}  // namespace

namespace {

RunConfig load_run_config_impl(const std::filesystem::path& path);

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    try {
        return load_run_config_impl(path);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
}

namespace {

RunConfig load_run_config_impl(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object: " + path.string());
    }
    RunConfig config;
    config.config_path = path;
    const auto base = path.parent_path();

    if (!doc.contains("policy") || !doc["policy"].is_string()) {
        throw ConfigError("config lacks a `policy` path");
    }
    config.policy_path = resolve_path(base, doc["policy"].get<std::string>());

    if (doc.contains("templates")) {
        const auto& t = doc["templates"];
        auto tp = [&](const char* key) -> std::filesystem::path {
            if (!t.contains(key)) return {};
            return resolve_path(base, t[key].get<std::string>());
        };
        config.templates.generation = tp("generation");
        config.templates.validation = tp("validation");
        config.templates.cot = tp("cot");
        config.templates.classify_system_prompt = tp("classify_system_prompt");
        config.templates.classify_user_prompt = tp("classify_user_prompt");
        config.templates.classify_system_response = tp("classify_system_response");
        config.templates.classify_user_response = tp("classify_user_response");
    }

    if (doc.contains("endpoints")) {
        const auto& e = doc["endpoints"];
        // generation roles default to temperature 0.8 for diversity,
        // judge and guard to 0.0 for determinism
        if (e.contains("prompt_generator")) {
            config.prompt_generator = endpoint_from_json(e["prompt_generator"], "prompt_generator", 0.8);
        }
        if (e.contains("response_generator")) {
            const auto& rg = e["response_generator"];
            if (rg.is_array()) {
                int idx = 0;
                for (const auto& one : rg) {
                    config.response_generators.push_back(endpoint_from_json(
                        one, "response_generator[" + std::to_string(idx++) + "]", 0.8));
                }
            } else {
                config.response_generators.push_back(
                    endpoint_from_json(rg, "response_generator", 0.8));
            }
        }
        if (e.contains("judge")) {
            config.judge = endpoint_from_json(e["judge"], "judge", 0.0);
        }
        if (e.contains("guard")) {
            config.guard = endpoint_from_json(e["guard"], "guard", 0.0);
        }
    }

    if (doc.contains("builder")) {
        const auto& b = doc["builder"];
        config.builder.inversion = b.value("inversion", true);
        config.builder.use_cot = b.value("use_cot", true);
        config.builder.include_synthetic = b.value("include_synthetic", true);
        config.builder.seed = b.value("seed", 0ULL);
        config.builder.val_fraction = b.value("val_fraction", 0.0);
    }

    config.concurrency = doc.value("concurrency", 1);
    if (config.concurrency < 1) {
        throw ConfigError("concurrency must be >= 1");
    }
    config.output_dir = resolve_path(base, doc.value("output_dir", std::string("out")));
    config.per_category = doc.value("per_category", 1);
    config.attempt_budget = doc.value("attempt_budget", 8);
    config.per_scenario = doc.value("per_scenario", 1);
    config.bench_runs = doc.value("bench_runs", 10);

    json resolved{{"policy", config.policy_path.string()},
                  {"concurrency", config.concurrency},
                  {"output_dir", config.output_dir.string()},
                  {"per_category", config.per_category},
                  {"attempt_budget", config.attempt_budget},
                  {"per_scenario", config.per_scenario},
                  {"bench_runs", config.bench_runs},
                  {"builder",
                   {{"inversion", config.builder.inversion},
                    {"use_cot", config.builder.use_cot},
                    {"include_synthetic", config.builder.include_synthetic},
                    {"seed", config.builder.seed},
                    {"val_fraction", config.builder.val_fraction}}}};
    json templates = json::object();
    auto put_template = [&](const char* key, const std::filesystem::path& p) {
        if (!p.empty()) templates[key] = p.string();
    };
    put_template("generation", config.templates.generation);
    put_template("validation", config.templates.validation);
    put_template("cot", config.templates.cot);
    put_template("classify_system_prompt", config.templates.classify_system_prompt);
    put_template("classify_user_prompt", config.templates.classify_user_prompt);
    put_template("classify_system_response", config.templates.classify_system_response);
    put_template("classify_user_response", config.templates.classify_user_response);
    resolved["templates"] = std::move(templates);
    json endpoints = json::object();
    if (config.prompt_generator) {
        endpoints["prompt_generator"] = endpoint_to_resolved_json(*config.prompt_generator);
    }
    if (!config.response_generators.empty()) {
        json list = json::array();
        for (const auto& r : config.response_generators) {
            list.push_back(endpoint_to_resolved_json(r));
        }
        endpoints["response_generator"] = std::move(list);
    }
    if (config.judge) {
        endpoints["judge"] = endpoint_to_resolved_json(*config.judge);
    }
    if (config.guard) {
        endpoints["guard"] = endpoint_to_resolved_json(*config.guard);
    }
    resolved["endpoints"] = std::move(endpoints);
    config.resolved = std::move(resolved);
    return config;
}

}  // namespace

std::string config_hash(const RunConfig& config) {
    return to_hex16(fnv1a64(dump_canonical(config.resolved)));
}

json run_summary_to_json(const RunSummary& s) {
    return json{{"schema", "guardkit/run-summary@1"},
                {"subcommand", s.subcommand},
                {"config_hash", s.config_hash},
                {"inputs", s.inputs},
                {"outputs", s.outputs},
                {"counts", s.counts},
                {"duration_ms", s.duration_ms}};
}

void write_run_summary(const std::filesystem::path& output_dir, const RunSummary& s) {
    write_json_file(output_dir / ("run_summary." + s.subcommand + ".json"),
                    run_summary_to_json(s));
}

}  // namespace guardkit
