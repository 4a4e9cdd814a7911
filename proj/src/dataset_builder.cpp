#include "guardkit/dataset_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "guardkit/errors.hpp"
#include "guardkit/parallel.hpp"
#include "guardkit/rng.hpp"
#include "guardkit/template_engine.hpp"

namespace guardkit {

namespace {

constexpr std::size_t kFailureDetailMax = 300;

std::string truncate_detail(const std::string& s) {
    if (s.size() <= kFailureDetailMax) {
        return s;
    }
    return s.substr(0, kFailureDetailMax) + "...";
}

bool json_value_in(const json& value, const std::vector<json>& candidates) {
    for (const auto& c : candidates) {
        if (value == c) {
            return true;
        }
    }
    return false;
}

// Field names may use dots to reach into nested objects, so judged-pair
// records ("verdict.violation") are ingestable without conversion.
const json* lookup_field(const json& record, const std::string& path) {
    const json* node = &record;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot - pos);
        if (!node->is_object() || !node->contains(key)) {
            return nullptr;
        }
        node = &(*node)[key];
        if (dot == std::string::npos) {
            return node;
        }
        pos = dot + 1;
    }
}

std::uint64_t factorial(std::size_t k) {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= k; ++i) {
        f *= i;
    }
    return f;
}

MixRow& row_for(MixStats& stats, TaskKind task, const std::string& source) {
    for (auto& row : stats.rows) {
        if (row.task == task && row.source == source) {
            return row.counts;
        }
    }
    stats.rows.push_back({task, source, MixRow{}});
    return stats.rows.back().counts;
}

void count_example(MixRow& row, bool positive, bool has_cot) {
    ++row.total;
    if (positive) {
        ++row.positives;
        has_cot ? ++row.positives_with_cot : ++row.positives_without_cot;
    } else {
        ++row.negatives;
        has_cot ? ++row.negatives_with_cot : ++row.negatives_without_cot;
    }
}

void order_rows(MixStats& stats) {
    std::stable_sort(stats.rows.begin(), stats.rows.end(), [](const auto& a, const auto& b) {
        return static_cast<int>(a.task) < static_cast<int>(b.task);
    });
}

void finish_grand(MixStats& stats) {
    stats.grand = MixRow{};
    for (const auto& row : stats.rows) {
        stats.grand.total += row.counts.total;
        stats.grand.positives += row.counts.positives;
        stats.grand.positives_with_cot += row.counts.positives_with_cot;
        stats.grand.positives_without_cot += row.counts.positives_without_cot;
        stats.grand.negatives += row.counts.negatives;
        stats.grand.negatives_with_cot += row.counts.negatives_with_cot;
        stats.grand.negatives_without_cot += row.counts.negatives_without_cot;
    }
}

void check_row_identities(const MixRow& r, const std::string& where) {
    if (r.total != r.positives + r.negatives) {
        throw ValidationError(where + ": total != positives + negatives");
    }
    if (r.positives != r.positives_with_cot + r.positives_without_cot) {
        throw ValidationError(where + ": positives CoT split does not add up");
    }
    if (r.negatives != r.negatives_with_cot + r.negatives_without_cot) {
        throw ValidationError(where + ": negatives CoT split does not add up");
    }
    if (r.total < 0 || r.positives < 0 || r.negatives < 0 || r.positives_with_cot < 0 ||
        r.positives_without_cot < 0 || r.negatives_with_cot < 0 || r.negatives_without_cot < 0) {
        throw ValidationError(where + ": negative count");
    }
}

json mix_row_to_json(const MixRow& r) {
    return json{{"total", r.total},
                {"positives", r.positives},
                {"positives_with_cot", r.positives_with_cot},
                {"positives_without_cot", r.positives_without_cot},
                {"negatives", r.negatives},
                {"negatives_with_cot", r.negatives_with_cot},
                {"negatives_without_cot", r.negatives_without_cot}};
}

MixRow mix_row_from_json(const json& j) {
    MixRow r;
    r.total = j.at("total").get<long>();
    r.positives = j.at("positives").get<long>();
    r.positives_with_cot = j.at("positives_with_cot").get<long>();
    r.positives_without_cot = j.at("positives_without_cot").get<long>();
    r.negatives = j.at("negatives").get<long>();
    r.negatives_with_cot = j.at("negatives_with_cot").get<long>();
    r.negatives_without_cot = j.at("negatives_without_cot").get<long>();
    return r;
}

}  // namespace

const char* task_kind_name(TaskKind k) {
    return k == TaskKind::Prompt ? "prompt" : "prompt_response";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "prompt") return TaskKind::Prompt;
    if (name == "prompt_response") return TaskKind::PromptResponse;
    throw ConfigError("unknown task kind: " + name);
}

std::vector<SourceManifest> load_sources_manifest(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    if (!doc.is_object() || !doc.contains("sources") || !doc["sources"].is_array()) {
        throw ConfigError("sources manifest needs a top-level `sources` array");
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    std::vector<SourceManifest> sources;
    for (const auto& s : doc["sources"]) {
        SourceManifest m;
        m.name = s.value("name", "");
        if (m.name.empty()) {
            throw ConfigError("source without a name in manifest");
        }
        m.task = task_kind_from_name(s.value("task", "prompt"));
        m.path = resolve(s.value("path", ""));
        m.taxonomy_path = resolve(s.value("taxonomy", ""));
        m.taxonomy = load_policy_file(m.taxonomy_path);
        m.synthetic = s.value("synthetic", false);
        m.cot_coverage = s.value("cot_coverage", 0.0);
        if (m.cot_coverage < 0.0 || m.cot_coverage > 1.0) {
            throw ConfigError("source " + m.name + ": cot_coverage must be in [0,1]");
        }
        if (s.contains("fields") && s["fields"].is_object()) {
            const auto& f = s["fields"];
            m.fields.prompt = f.value("prompt", m.fields.prompt);
            m.fields.response = f.value("response", m.fields.response);
            m.fields.label = f.value("label", m.fields.label);
            m.fields.category = f.value("category", m.fields.category);
            m.fields.cot = f.value("cot", m.fields.cot);
        }
        if (s.contains("positive_values")) {
            m.fields.positive_values = s["positive_values"].get<std::vector<json>>();
        }
        if (s.contains("negative_values")) {
            m.fields.negative_values = s["negative_values"].get<std::vector<json>>();
        }
        sources.push_back(std::move(m));
    }
    return sources;
}

json labeled_to_json(const LabeledExample& e) {
    json j{{"schema", "guardkit/labeled@1"},
           {"prompt", e.prompt},
           {"label", e.label},
           {"source", e.source}};
    if (e.response) j["response"] = *e.response;
    if (e.category) j["category"] = *e.category;
    if (e.cot) j["cot"] = *e.cot;
    return j;
}

LabeledExample labeled_from_json(const json& j) {
    LabeledExample e;
    e.prompt = j.at("prompt").get<std::string>();
    e.label = j.at("label").get<bool>();
    e.source = j.value("source", "");
    if (j.contains("response") && j["response"].is_string()) e.response = j["response"];
    if (j.contains("category") && j["category"].is_string()) e.category = j["category"];
    if (j.contains("cot") && j["cot"].is_string()) e.cot = j["cot"];
    return e;
}

IngestResult ingest_source(const SourceManifest& source) {
    IngestResult result;
    const auto records = read_jsonl(source.path);
    long line = 0;
    for (const auto& r : records) {
        ++line;
        auto fail = [&](const std::string& reason) {
            result.failures.push_back({"ingest", source.name + "#" + std::to_string(line), reason,
                                       truncate_detail(dump_canonical(r))});
        };
        if (!r.is_object()) {
            fail("record_not_object");
            continue;
        }
        LabeledExample e;
        e.source = source.name;
        const json* prompt = lookup_field(r, source.fields.prompt);
        if (!prompt || !prompt->is_string()) {
            fail("missing_prompt");
            continue;
        }
        e.prompt = prompt->get<std::string>();
        if (source.task == TaskKind::PromptResponse) {
            const json* response = lookup_field(r, source.fields.response);
            if (!response || !response->is_string() || response->get<std::string>().empty()) {
                fail("missing_response");
                continue;
            }
            e.response = response->get<std::string>();
        }
        const json* label = lookup_field(r, source.fields.label);
        if (!label) {
            fail("missing_label");
            continue;
        }
        if (json_value_in(*label, source.fields.positive_values)) {
            e.label = true;
        } else if (json_value_in(*label, source.fields.negative_values)) {
            e.label = false;
        } else {
            fail("uninterpretable_label");
            continue;
        }
        const json* category = lookup_field(r, source.fields.category);
        if (category && category->is_string() && !category->get<std::string>().empty()) {
            const std::string slug = normalize_category_name(category->get<std::string>());
            if (!source.taxonomy.has_category(slug)) {
                fail("category_not_in_taxonomy");
                continue;
            }
            e.category = slug;
        }
        const json* cot = lookup_field(r, source.fields.cot);
        if (cot && cot->is_string() && !cot->get<std::string>().empty()) {
            e.cot = cot->get<std::string>();
        }
        result.examples.push_back(std::move(e));
    }
    return result;
}

const char* component_display_name(TargetComponent c) {
    switch (c) {
        case TargetComponent::CoT: return "CoT";
        case TargetComponent::Label: return "Label";
        case TargetComponent::Category: return "Category";
    }
    return "?";
}

const char* component_key(TargetComponent c) {
    switch (c) {
        case TargetComponent::CoT: return "cot";
        case TargetComponent::Label: return "label";
        case TargetComponent::Category: return "category";
    }
    return "?";
}

TargetComponent component_from_key(const std::string& key) {
    if (key == "cot") return TargetComponent::CoT;
    if (key == "label") return TargetComponent::Label;
    if (key == "category") return TargetComponent::Category;
    throw ConfigError("unknown target component: " + key);
}

std::vector<std::vector<TargetComponent>> permutations_for(
    const std::set<TargetComponent>& components) {
    if (components.empty()) {
        throw MissingLabel("target component set is empty");
    }
    if (!components.count(TargetComponent::Label)) {
        throw MissingLabel("every training target must contain the Label component");
    }
    std::vector<TargetComponent> base(components.begin(), components.end());
    std::sort(base.begin(), base.end(), [](TargetComponent a, TargetComponent b) {
        return std::string(component_display_name(a)) < component_display_name(b);
    });
    std::vector<std::vector<TargetComponent>> out;
    std::vector<std::size_t> idx(base.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    do {
        std::vector<TargetComponent> perm;
        perm.reserve(idx.size());
        for (std::size_t i : idx) perm.push_back(base[i]);
        out.push_back(std::move(perm));
    } while (std::next_permutation(idx.begin(), idx.end()));
    return out;
}

std::string render_target_component(TargetComponent c, const LabeledExample& e) {
    switch (c) {
        case TargetComponent::CoT:
            return "[REASONING] " + e.cot.value_or("");
        case TargetComponent::Label:
            return std::string("[LABEL] ") + (e.label ? "unsafe" : "safe");
        case TargetComponent::Category:
            return "[CATEGORY] " + e.category.value_or("");
    }
    return "";
}

std::string render_target_text(
    const std::vector<std::pair<TargetComponent, std::string>>& targets) {
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (i) out += '\n';
        out += targets[i].second;
    }
    return out;
}

json instruction_to_json(const InstructionExample& e) {
    const std::size_t split = e.instruction.find("\n\n");
    const std::string system_text =
        split == std::string::npos ? e.instruction : e.instruction.substr(0, split);
    const std::string user_text =
        split == std::string::npos ? std::string() : e.instruction.substr(split + 2);
    json targets = json::array();
    for (const auto& [component, text] : e.targets) {
        targets.push_back(json{{"component", component_key(component)}, {"text", text}});
    }
    return json{{"schema", "guardkit/instruction@1"},
                {"messages",
                 json::array({json{{"role", "system"}, {"content", system_text}},
                              json{{"role", "user"}, {"content", user_text}},
                              json{{"role", "assistant"}, {"content", render_target_text(e.targets)}}})},
                {"targets", std::move(targets)},
                {"task", task_kind_name(e.task)},
                {"source", e.source},
                {"label", e.label},
                {"permutation", e.permutation_id}};
}

InstructionExample instruction_from_json(const json& j) {
    InstructionExample e;
    const auto& messages = j.at("messages");
    e.instruction = messages.at(0).at("content").get<std::string>() + "\n\n" +
                    messages.at(1).at("content").get<std::string>();
    for (const auto& t : j.at("targets")) {
        e.targets.emplace_back(component_from_key(t.at("component").get<std::string>()),
                               t.at("text").get<std::string>());
    }
    e.task = task_kind_from_name(j.at("task").get<std::string>());
    e.source = j.value("source", "");
    e.label = j.at("label").get<bool>();
    e.permutation_id = j.at("permutation").get<int>();
    return e;
}

MixStats compute_mix_stats(const std::vector<InstructionExample>& examples) {
    MixStats stats;
    for (const auto& e : examples) {
        bool has_cot = false;
        for (const auto& [component, text] : e.targets) {
            if (component == TargetComponent::CoT) {
                has_cot = true;
            }
        }
        count_example(row_for(stats, e.task, e.source), e.label, has_cot);
    }
    order_rows(stats);
    finish_grand(stats);
    return stats;
}

MixStats compute_mix_stats_labeled(const std::vector<LabeledExample>& examples) {
    MixStats stats;
    for (const auto& e : examples) {
        const TaskKind task = e.response ? TaskKind::PromptResponse : TaskKind::Prompt;
        count_example(row_for(stats, task, e.source), e.label, e.cot.has_value());
    }
    order_rows(stats);
    finish_grand(stats);
    return stats;
}

void validate_mix_stats(const MixStats& stats) {
    MixRow sums;
    for (const auto& row : stats.rows) {
        check_row_identities(row.counts, "row " + std::string(task_kind_name(row.task)) + "/" +
                                             row.source);
        sums.total += row.counts.total;
        sums.positives += row.counts.positives;
        sums.positives_with_cot += row.counts.positives_with_cot;
        sums.positives_without_cot += row.counts.positives_without_cot;
        sums.negatives += row.counts.negatives;
        sums.negatives_with_cot += row.counts.negatives_with_cot;
        sums.negatives_without_cot += row.counts.negatives_without_cot;
    }
    check_row_identities(stats.grand, "grand totals");
    if (sums.total != stats.grand.total || sums.positives != stats.grand.positives ||
        sums.positives_with_cot != stats.grand.positives_with_cot ||
        sums.positives_without_cot != stats.grand.positives_without_cot ||
        sums.negatives != stats.grand.negatives ||
        sums.negatives_with_cot != stats.grand.negatives_with_cot ||
        sums.negatives_without_cot != stats.grand.negatives_without_cot) {
        throw ValidationError("grand totals do not equal the column sums");
    }
}

json mix_stats_to_json(const MixStats& stats) {
    json rows = json::array();
    for (const auto& row : stats.rows) {
        json r = mix_row_to_json(row.counts);
        r["task"] = task_kind_name(row.task);
        r["source"] = row.source;
        rows.push_back(std::move(r));
    }
    return json{{"schema", "guardkit/mix-stats@1"},
                {"rows", std::move(rows)},
                {"grand", mix_row_to_json(stats.grand)}};
}

MixStats mix_stats_from_json(const json& j) {
    MixStats stats;
    for (const auto& r : j.at("rows")) {
        MixStats::Row row;
        row.task = task_kind_from_name(r.at("task").get<std::string>());
        row.source = r.at("source").get<std::string>();
        row.counts = mix_row_from_json(r);
        stats.rows.push_back(std::move(row));
    }
    stats.grand = mix_row_from_json(j.at("grand"));
    return stats;
}

std::string render_mix_stats_table(const MixStats& stats) {
    const std::vector<std::string> headers = {"Type",      "Source",     "Total",
                                              "Positives", "w/ CoT (P)", "w/o CoT (P)",
                                              "Negatives", "w/ CoT (N)", "w/o CoT (N)"};
    std::vector<std::vector<std::string>> cells;
    auto row_cells = [](const std::string& type, const std::string& source, const MixRow& r) {
        return std::vector<std::string>{type,
                                        source,
                                        std::to_string(r.total),
                                        std::to_string(r.positives),
                                        std::to_string(r.positives_with_cot),
                                        std::to_string(r.positives_without_cot),
                                        std::to_string(r.negatives),
                                        std::to_string(r.negatives_with_cot),
                                        std::to_string(r.negatives_without_cot)};
    };
    for (const auto& row : stats.rows) {
        cells.push_back(row_cells(row.task == TaskKind::Prompt ? "Prompt" : "Prompt+Response",
                                  row.source, row.counts));
    }
    cells.push_back(row_cells("Total", "-", stats.grand));

    std::vector<std::size_t> widths(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) {
        widths[c] = headers[c].size();
        for (const auto& row : cells) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            if (c < 2) {
                out << row[c] << std::string(widths[c] - row[c].size(), ' ');
            } else {
                out << std::string(widths[c] - row[c].size(), ' ') << row[c];
            }
        }
        out << '\n';
    };
    emit(headers);
    for (const auto& row : cells) {
        emit(row);
    }
    return out.str();
}

namespace {

std::set<TargetComponent> available_components(const LabeledExample& e, bool use_cot) {
    std::set<TargetComponent> components{TargetComponent::Label};
    if (use_cot && e.cot) {
        components.insert(TargetComponent::CoT);
    }
    if (e.category) {
        components.insert(TargetComponent::Category);
    }
    return components;
}

std::vector<TargetComponent> fixed_order(const std::set<TargetComponent>& components) {
    std::vector<TargetComponent> order;
    for (TargetComponent c :
         {TargetComponent::CoT, TargetComponent::Label, TargetComponent::Category}) {
        if (components.count(c)) {
            order.push_back(c);
        }
    }
    return order;
}

int index_of_permutation(const std::vector<std::vector<TargetComponent>>& universe,
                         const std::vector<TargetComponent>& order) {
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (universe[i] == order) {
            return static_cast<int>(i);
        }
    }
    throw ValidationError("permutation not found in its universe");
}

}  // namespace

BuildResult build_instruction_set(
    const std::vector<std::pair<SourceManifest, std::vector<LabeledExample>>>& sources,
    const BuildOptions& options) {
    if (options.templates.system_prompt.empty() || options.templates.user_prompt.empty() ||
        options.templates.system_response.empty() || options.templates.user_response.empty()) {
        throw ConfigError("build options lack the classify instruction templates");
    }
    if (options.val_fraction < 0.0 || options.val_fraction >= 1.0) {
        throw ConfigError("val_fraction must be in [0, 1)");
    }

    std::vector<std::pair<const SourceManifest*, const std::vector<LabeledExample>*>> active;
    for (const auto& [manifest, examples] : sources) {
        if (!options.include_synthetic && manifest.synthetic) {
            continue;
        }
        active.emplace_back(&manifest, &examples);
    }
    if (active.empty()) {
        throw EmptyCorpus("no sources left after filtering");
    }

    BuildResult result;
    SeededRng rng(options.seed);
    for (const auto& [manifest, examples] : active) {
        const std::string policy_block = render_policy_block(manifest->taxonomy);
        const bool response_level = manifest->task == TaskKind::PromptResponse;
        const std::string& system_template =
            response_level ? options.templates.system_response : options.templates.system_prompt;
        const std::string& user_template =
            response_level ? options.templates.user_response : options.templates.user_prompt;
        const std::string system_text =
            render_template(system_template, {{"policy_block", policy_block}});

        for (const auto& e : *examples) {
            std::map<std::string, std::string> vars{{"prompt", e.prompt}};
            if (response_level) {
                vars["response"] = e.response.value_or("");
            }
            InstructionExample out;
            out.instruction = system_text + "\n\n" + render_template(user_template, vars);
            out.source = e.source;
            out.label = e.label;
            out.task = manifest->task;

            const auto components = available_components(e, options.use_cot);
            const auto universe = permutations_for(components);
            std::vector<TargetComponent> order;
            if (options.inversion) {
                out.permutation_id = static_cast<int>(rng.below(universe.size()));
                order = universe[static_cast<std::size_t>(out.permutation_id)];
            } else {
                order = fixed_order(components);
                out.permutation_id = index_of_permutation(universe, order);
            }
            for (TargetComponent c : order) {
                out.targets.emplace_back(c, render_target_component(c, e));
            }
            result.corpus.push_back(std::move(out));
        }
    }
    if (result.corpus.empty()) {
        throw EmptyCorpus("sources produced no examples");
    }

    if (options.val_fraction > 0.0) {
        const std::size_t n = result.corpus.size();
        const auto take = static_cast<std::size_t>(
            std::floor(options.val_fraction * static_cast<double>(n)));
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        SeededRng split_rng(options.seed ^ 0x9e3779b97f4a7c15ull);
        split_rng.shuffle(order);
        std::vector<bool> in_val(n, false);
        for (std::size_t i = 0; i < take; ++i) in_val[order[i]] = true;
        std::vector<InstructionExample> train;
        for (std::size_t i = 0; i < n; ++i) {
            (in_val[i] ? result.validation : train).push_back(std::move(result.corpus[i]));
        }
        result.corpus = std::move(train);
    }

    std::vector<InstructionExample> everything = result.corpus;
    everything.insert(everything.end(), result.validation.begin(), result.validation.end());
    result.stats = compute_mix_stats(everything);
    validate_mix_stats(result.stats);
    return result;
}

BuildResult build_instruction_set(const std::vector<SourceManifest>& sources,
                                  const BuildOptions& options) {
    std::vector<std::pair<SourceManifest, std::vector<LabeledExample>>> loaded;
    std::vector<StageFailure> failures;
    for (const auto& source : sources) {
        if (!options.include_synthetic && source.synthetic) {
            continue;
        }
        IngestResult ingested = ingest_source(source);
        failures.insert(failures.end(), ingested.failures.begin(), ingested.failures.end());
        loaded.emplace_back(source, std::move(ingested.examples));
    }
    if (loaded.empty()) {
        throw EmptyCorpus("no sources left after filtering");
    }
    BuildResult result = build_instruction_set(loaded, options);
    result.failures.insert(result.failures.begin(), failures.begin(), failures.end());
    return result;
}

std::vector<std::size_t> cot_selection_indices(const std::vector<LabeledExample>& examples,
                                               double coverage, std::uint64_t seed) {
    if (coverage < 0.0 || coverage > 1.0) {
        throw ConfigError("cot coverage must be in [0,1]");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (!examples[i].cot) {
            candidates.push_back(i);
        }
    }
    const auto want = static_cast<std::size_t>(
        std::ceil(coverage * static_cast<double>(examples.size())));
    const std::size_t take = std::min(want, candidates.size());
    SeededRng rng(seed);
    rng.shuffle(candidates);
    candidates.resize(take);
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

AttachCotResult attach_cot(Gateway& gateway, std::vector<LabeledExample> examples,
                           const PolicyDocument& taxonomy, const std::string& cot_template,
                           const EndpointProfile& generator, double coverage, std::uint64_t seed,
                           int in_flight) {
    AttachCotResult result;
    const auto selected = cot_selection_indices(examples, coverage, seed);
    if (!selected.empty() && cot_template.empty()) {
        throw ConfigError("attach_cot needs a rationale template");
    }
    const std::string policy_block = render_policy_block(taxonomy);

    std::vector<std::optional<std::string>> rationales(selected.size());
    std::vector<bool> failed(selected.size(), false);
    parallel_for_index(selected.size(), in_flight, [&](std::size_t k) {
        const LabeledExample& e = examples[selected[k]];
        const std::string prompt = render_template(
            cot_template, {{"policy_block", policy_block},
                           {"prompt", e.prompt},
                           {"response", e.response.value_or("")},
                           {"label", e.label ? "unsafe" : "safe"}});
        try {
            const ChatExchange exchange = gateway.complete(generator, {{"user", prompt}});
            rationales[k] = exchange.completion;
        } catch (const Error&) {
            failed[k] = true;
        }
    });
    for (std::size_t k = 0; k < selected.size(); ++k) {
        if (rationales[k] && !rationales[k]->empty()) {
            examples[selected[k]].cot = *rationales[k];
            ++result.attached;
        } else {
            ++result.failed;
        }
    }
    result.examples = std::move(examples);
    return result;
}

TrainManifest emit_train_manifest(const MixStats& stats,
                                  const std::vector<std::string>& corpus_files) {
    TrainManifest m;
    m.corpus_files = corpus_files;
    m.stats = mix_stats_to_json(stats);
    return m;
}

json train_manifest_to_json(const TrainManifest& m) {
    json j{{"schema", "guardkit/train-manifest@1"},
           {"adapter", {{"kind", "lora"}, {"rank", m.lora_rank}}},
           {"epochs", m.epochs},
           {"learning_rate", m.learning_rate},
           {"per_device_batch_size", m.per_device_batch_size},
           {"warmup_ratio", m.warmup_ratio},
           {"context_length", m.context_length},
           {"precision", m.precision},
           {"corpus_files", m.corpus_files}};
    if (m.stats) {
        j["stats"] = *m.stats;
    }
    return j;
}

TrainManifest train_manifest_from_json(const json& j) {
    TrainManifest m;
    m.lora_rank = j.at("adapter").at("rank").get<int>();
    m.epochs = j.at("epochs").get<int>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.per_device_batch_size = j.at("per_device_batch_size").get<int>();
    m.warmup_ratio = j.at("warmup_ratio").get<double>();
    m.context_length = j.at("context_length").get<int>();
    m.precision = j.value("precision", "bfloat16");
    if (j.contains("corpus_files")) {
        m.corpus_files = j["corpus_files"].get<std::vector<std::string>>();
    }
    if (j.contains("stats")) {
        m.stats = j["stats"];
    }
    return m;
}

}  // namespace guardkit
