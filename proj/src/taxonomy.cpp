#include "guardkit/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "guardkit/errors.hpp"

namespace guardkit {

namespace {

constexpr const char* kBeginMarker = "<BEGIN POLICY>";
constexpr const char* kEndMarker = "<END POLICY>";
constexpr const char* kPolicySchema = "guardkit/policy@1";

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_separator(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

std::string single_line(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (c == '\n' || c == '\r') {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) {
            out += ' ';
        }
        pending_space = false;
        out += c;
    }
    return out;
}

void check_line_field(const std::string& value, const std::string& what) {
    if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos) {
        throw ValidationError(what + " must not contain line breaks");
    }
}

void check_no_markers(const std::string& value, const std::string& what) {
    if (value.find(kBeginMarker) != std::string::npos ||
        value.find(kEndMarker) != std::string::npos) {
        throw ValidationError(what + " must not contain policy block markers");
    }
}

}  // namespace

bool PolicyDocument::has_category(std::string_view id) const {
    return find_category(id) != nullptr;
}

const Category* PolicyDocument::find_category(std::string_view id) const {
    for (const auto& c : categories) {
        if (c.id == id) {
            return &c;
        }
    }
    return nullptr;
}

std::string normalize_category_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (char c : raw) {
        if (is_separator(c)) {
            pending_sep = true;
            continue;
        }
        if (std::ispunct(static_cast<unsigned char>(c))) {
            continue;
        }
        if (pending_sep && !out.empty()) {
            out += '-';
        }
        pending_sep = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

void validate_policy(const PolicyDocument& doc) {
    if (doc.categories.empty()) {
        throw ValidationError("policy document has no categories");
    }
    check_line_field(doc.title, "policy title");
    check_line_field(doc.version, "policy version");
    std::set<std::string> ids;
    for (const auto& c : doc.categories) {
        if (c.id.empty()) {
            throw ValidationError("category id is empty");
        }
        if (normalize_category_name(c.id) != c.id) {
            throw ValidationError("category id is not a normalized slug: " + c.id);
        }
        if (!ids.insert(c.id).second) {
            throw ValidationError("duplicate category id: " + c.id);
        }
        if (trim(c.name).empty()) {
            throw ValidationError("category name is empty: " + c.id);
        }
        check_line_field(c.name, "category name");
        check_no_markers(c.name, "category name");
        check_no_markers(c.definition, "category definition");
    }
    for (const auto& c : doc.categories) {
        if (c.parent) {
            if (!ids.count(*c.parent)) {
                throw ValidationError("category " + c.id + " references unknown parent: " + *c.parent);
            }
            if (*c.parent == c.id) {
                throw ValidationError("category " + c.id + " is its own parent");
            }
        }
    }
}

PolicyDocument parse_policy_text(const std::string& source) {
    PolicyDocument doc;
    std::istringstream in(source);
    std::string line;
    int line_no = 0;
    bool in_section = false;
    Category current;
    std::vector<std::string> definition_lines;

    auto flush = [&]() {
        if (!in_section) {
            return;
        }
        std::string def;
        for (std::size_t i = 0; i < definition_lines.size(); ++i) {
            if (i) def += '\n';
            def += definition_lines[i];
        }
        current.definition = def;
        doc.categories.push_back(current);
        current = Category{};
        definition_lines.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const std::string stripped = trim(line);
        if (stripped.empty()) {
            continue;
        }
        if (stripped == "# category:") {
            flush();
            in_section = true;
            continue;
        }
        if (stripped[0] == '#') {
            continue;  // comment
        }
        if (!line.empty() && std::isspace(static_cast<unsigned char>(line[0]))) {
            if (!in_section) {
                throw ParseError("indented text outside a category section", line_no);
            }
            definition_lines.push_back(stripped);
            continue;
        }
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos) {
            throw ParseError("expected `key: value` line", line_no);
        }
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (!in_section) {
            if (key == "title") {
                doc.title = value;
            } else if (key == "version") {
                doc.version = value;
            } else {
                throw ParseError("unknown header key: " + key, line_no);
            }
            continue;
        }
        if (key == "id") {
            current.id = value;
        } else if (key == "name") {
            current.name = value;
        } else if (key == "parent") {
            current.parent = value;
        } else {
            throw ParseError("unknown category key: " + key, line_no);
        }
    }
    flush();
    validate_policy(doc);
    return doc;
}

std::string render_policy_text(const PolicyDocument& doc) {
    std::string out;
    out += "title: " + doc.title + "\n";
    out += "version: " + doc.version + "\n";
    for (const auto& c : doc.categories) {
        out += "\n# category:\n";
        out += "id: " + c.id + "\n";
        out += "name: " + c.name + "\n";
        if (c.parent) {
            out += "parent: " + *c.parent + "\n";
        }
        std::istringstream body(c.definition);
        std::string line;
        while (std::getline(body, line)) {
            out += "  " + line + "\n";
        }
    }
    return out;
}

PolicyDocument parse_policy_records(const std::vector<json>& records) {
    PolicyDocument doc;
    bool saw_header = false;
    for (const auto& r : records) {
        if (!r.is_object()) {
            throw ParseError("policy record is not an object");
        }
        const std::string kind = r.value("record", "");
        if (kind == "policy") {
            if (saw_header) {
                throw ParseError("duplicate policy header record");
            }
            saw_header = true;
            doc.title = r.value("title", "");
            doc.version = r.value("version", "");
        } else if (kind == "category") {
            Category c;
            c.id = r.value("id", "");
            c.name = r.value("name", "");
            c.definition = r.value("definition", "");
            if (r.contains("parent") && !r["parent"].is_null()) {
                c.parent = r["parent"].get<std::string>();
            }
            doc.categories.push_back(std::move(c));
        } else {
            throw ParseError("unknown policy record kind: " + kind);
        }
    }
    if (!saw_header) {
        throw ParseError("policy record file has no header record");
    }
    validate_policy(doc);
    return doc;
}

std::vector<json> render_policy_records(const PolicyDocument& doc) {
    std::vector<json> records;
    records.push_back(json{{"schema", kPolicySchema},
                           {"record", "policy"},
                           {"title", doc.title},
                           {"version", doc.version}});
    for (const auto& c : doc.categories) {
        json r{{"record", "category"},
               {"id", c.id},
               {"name", c.name},
               {"definition", c.definition}};
        if (c.parent) {
            r["parent"] = *c.parent;
        } else {
            r["parent"] = nullptr;
        }
        records.push_back(std::move(r));
    }
    return records;
}

PolicyDocument load_policy_file(const std::filesystem::path& path) {
    if (path.extension() == ".jsonl") {
        return parse_policy_records(read_jsonl(path));
    }
    return parse_policy_text(read_text_file(path));
}

std::string render_policy_block(const PolicyDocument& doc,
                                const std::vector<std::string>& filter) {
    std::set<std::string> wanted(filter.begin(), filter.end());
    for (const auto& id : wanted) {
        if (!doc.has_category(id)) {
            throw UnknownCategory("filter references unknown category: " + id);
        }
    }
    std::string out = kBeginMarker;
    out += '\n';
    bool first = true;
    for (const auto& c : doc.categories) {
        if (!wanted.empty() && !wanted.count(c.id)) {
            continue;
        }
        if (!first) {
            out += '\n';
        }
        first = false;
        if (c.parent) {
            const Category* p = doc.find_category(*c.parent);
            out += "Category: " + p->name + "\n";
            out += "Subcategory: " + c.name + "\n";
        } else {
            out += "Category: " + c.name + "\n";
        }
        out += "Policy Content: " + single_line(c.definition) + "\n";
    }
    out += kEndMarker;
    return out;
}

std::string render_policy_overview(const PolicyDocument& doc) {
    std::string out;
    for (const auto& c : doc.categories) {
        out += "- " + c.name + ": " + single_line(c.definition) + "\n";
    }
    return out;
}

}  // namespace guardkit
