#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "guardkit/jsonl.hpp"

namespace guardkit {

// One violation category of a safety taxonomy. Immutable after parsing.
struct Category {
    std::string id;          // normalization-stable slug, unique per document
    std::string name;        // display name
    std::string definition;  // free text, may span lines
    std::optional<std::string> parent;  // subcategory structure via parent id
};

struct PolicyDocument {
    std::string title;
    std::string version;
    std::vector<Category> categories;  // document order

    bool has_category(std::string_view id) const;
    const Category* find_category(std::string_view id) const;
};

// Lowercased, punctuation-stripped, whitespace-collapsed, hyphen-joined slug.
// '-' and '_' act as separators so the function is idempotent; other
// punctuation is removed. Empty input yields an empty slug (no-match).
std::string normalize_category_name(std::string_view raw);

// Checks every PolicyDocument invariant: at least one category, unique
// normalization-stable ids, nonempty names, resolvable parents, and no
// embedded policy-block markers or newlines in single-line fields.
void validate_policy(const PolicyDocument& doc);

// Human-editable text format: optional `title:` / `version:` header lines,
// then sections opened by `# category:` with `id:` / `name:` / `parent:`
// key lines and an indented definition body. `assets/policy/` ships an
// annotated example.
PolicyDocument parse_policy_text(const std::string& source);
std::string render_policy_text(const PolicyDocument& doc);

// Machine-oriented equivalent: line-delimited records, one header record
// followed by one record per category. Accepted interchangeably.
PolicyDocument parse_policy_records(const std::vector<json>& records);
std::vector<json> render_policy_records(const PolicyDocument& doc);

// Dispatches on extension: .jsonl records, anything else text.
PolicyDocument load_policy_file(const std::filesystem::path& path);

// Deterministic prompt block delimited by <BEGIN POLICY> / <END POLICY>,
// one Category/Subcategory/Policy Content stanza per selected category in
// document order. An empty filter selects every category; an unknown filter
// id raises UnknownCategory.
std::string render_policy_block(const PolicyDocument& doc,
                                const std::vector<std::string>& filter = {});

// Bulleted "- Name: definition" digest used for judge prompts.
std::string render_policy_overview(const PolicyDocument& doc);

}  // namespace guardkit
