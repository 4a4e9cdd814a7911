#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "guardkit/gateway.hpp"
#include "guardkit/synth_pipeline.hpp"
#include "guardkit/taxonomy.hpp"

namespace guardkit {

enum class TaskKind { Prompt, PromptResponse };

const char* task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

// Per-source adapter: raw record field names -> labeled-example fields, plus
// the values that count as a positive (violating) label.
struct FieldMap {
    std::string prompt = "prompt";
    std::string response = "response";
    std::string label = "label";
    std::string category = "category";
    std::string cot = "cot";
    std::vector<json> positive_values = {json(true), json("true"), json("unsafe"),
                                         json("violating"), json(1)};
    std::vector<json> negative_values = {json(false), json("false"), json("safe"),
                                         json("non-violating"), json(0)};
};

struct SourceManifest {
    std::string name;
    TaskKind task = TaskKind::Prompt;
    std::filesystem::path path;
    std::filesystem::path taxonomy_path;
    PolicyDocument taxonomy;  // the source's native taxonomy
    bool synthetic = false;
    double cot_coverage = 0.0;  // fraction to backfill when attach-cot runs
    FieldMap fields;
};

// Single JSON document listing sources; taxonomies are loaded eagerly.
// Relative paths resolve against the manifest's directory.
std::vector<SourceManifest> load_sources_manifest(const std::filesystem::path& path);

struct LabeledExample {
    std::string prompt;
    std::optional<std::string> response;  // present iff source task is PromptResponse
    bool label = false;                   // violating = positive
    std::optional<std::string> category;  // slug in the source taxonomy
    std::optional<std::string> cot;
    std::string source;
};

json labeled_to_json(const LabeledExample& e);
LabeledExample labeled_from_json(const json& j);

struct IngestResult {
    std::vector<LabeledExample> examples;
    std::vector<StageFailure> failures;  // per-example schema/taxonomy errors
};

IngestResult ingest_source(const SourceManifest& source);

enum class TargetComponent { CoT, Label, Category };

const char* component_display_name(TargetComponent c);  // "CoT" "Label" "Category"
const char* component_key(TargetComponent c);           // "cot" "label" "category"
TargetComponent component_from_key(const std::string& key);

// All k! orderings of the component set, in lexicographic order of the
// component display names; the index in this list is the permutation id.
// Label must be present (MissingLabel): every training target carries it.
std::vector<std::vector<TargetComponent>> permutations_for(
    const std::set<TargetComponent>& components);

struct InstructionExample {
    std::string instruction;  // system text + "\n\n" + user text
    std::vector<std::pair<TargetComponent, std::string>> targets;  // rendered, in order
    std::string source;
    bool label = false;
    int permutation_id = 0;
    TaskKind task = TaskKind::Prompt;
};

// Chat-shaped record: system (framing + taxonomy), user (prompt
// [+ response]), assistant (rendered target sequence), plus metadata.
json instruction_to_json(const InstructionExample& e);
InstructionExample instruction_from_json(const json& j);

// The target grammar: tagged components parseable in any order.
std::string render_target_component(TargetComponent c, const LabeledExample& e);
std::string render_target_text(const std::vector<std::pair<TargetComponent, std::string>>& targets);

struct ClassifyTemplates {
    std::string system_prompt;    // framing + {{policy_block}}, prompt level
    std::string user_prompt;      // {{prompt}}
    std::string system_response;  // framing + {{policy_block}}, response level
    std::string user_response;    // {{prompt}} + {{response}}
};

struct BuildOptions {
    bool inversion = true;
    bool use_cot = true;
    bool include_synthetic = true;
    std::uint64_t seed = 0;
    double val_fraction = 0.0;  // seeded validation split, 0 = no split
    ClassifyTemplates templates;
};

struct MixRow {
    long total = 0;
    long positives = 0;
    long positives_with_cot = 0;
    long positives_without_cot = 0;
    long negatives = 0;
    long negatives_with_cot = 0;
    long negatives_without_cot = 0;
};

struct MixStats {
    struct Row {
        TaskKind task;
        std::string source;
        MixRow counts;
    };
    std::vector<Row> rows;  // Prompt rows first, then PromptResponse, sources in first-seen order
    MixRow grand;
};

MixStats compute_mix_stats(const std::vector<InstructionExample>& examples);
MixStats compute_mix_stats_labeled(const std::vector<LabeledExample>& examples);

// Checks every internal identity: per-row total = P + N, the with/without
// CoT splits, the same identities on the grand row, and grand = column sums.
void validate_mix_stats(const MixStats& stats);

json mix_stats_to_json(const MixStats& stats);
MixStats mix_stats_from_json(const json& j);
std::string render_mix_stats_table(const MixStats& stats);

struct BuildResult {
    std::vector<InstructionExample> corpus;       // training portion
    std::vector<InstructionExample> validation;   // empty unless val_fraction > 0
    MixStats stats;                               // over the full corpus
    std::vector<StageFailure> failures;
};

// Renders ingested examples into instruction records under each source's
// native taxonomy. inversion=on draws each example's permutation uniformly
// (seeded) from permutations_for(its available components); inversion=off
// uses the fixed CoT -> Label -> Category order. use_cot=off removes CoT
// from the available components entirely.
BuildResult build_instruction_set(
    const std::vector<std::pair<SourceManifest, std::vector<LabeledExample>>>& sources,
    const BuildOptions& options);

// Convenience overload: ingests every source first (per-example failures
// carried through), then builds.
BuildResult build_instruction_set(const std::vector<SourceManifest>& sources,
                                  const BuildOptions& options);

struct AttachCotResult {
    std::vector<LabeledExample> examples;
    long attached = 0;
    long failed = 0;  // transport failures: example left without CoT
};

// Backfills CoT rationales for a seeded subset of size ceil(coverage * n)
// drawn from the examples lacking one. The prompt embeds the source's native
// taxonomy. Examples already carrying CoT are untouched.
AttachCotResult attach_cot(Gateway& gateway, std::vector<LabeledExample> examples,
                           const PolicyDocument& taxonomy, const std::string& cot_template,
                           const EndpointProfile& generator, double coverage, std::uint64_t seed,
                           int in_flight = 1);

// Indices attach_cot will target, exposed so the selection rule is testable:
// candidates = indices lacking CoT in input order, Fisher-Yates shuffled
// with SeededRng(seed), first min(ceil(coverage*n), |candidates|) taken,
// then sorted ascending.
std::vector<std::size_t> cot_selection_indices(const std::vector<LabeledExample>& examples,
                                               double coverage, std::uint64_t seed);

struct TrainManifest {
    int lora_rank = 16;
    int epochs = 3;
    double learning_rate = 1e-4;
    int per_device_batch_size = 8;
    double warmup_ratio = 0.03;
    int context_length = 2408;
    std::string precision = "bfloat16";
    std::vector<std::string> corpus_files;
    std::optional<json> stats;
};

TrainManifest emit_train_manifest(const MixStats& stats, const std::vector<std::string>& corpus_files);
json train_manifest_to_json(const TrainManifest& m);
TrainManifest train_manifest_from_json(const json& j);

}  // namespace guardkit
