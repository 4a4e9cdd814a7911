#include "guardkit/json_extract.hpp"

#include <cctype>

namespace guardkit {

namespace {

using nlohmann::json;

std::string_view trim_view(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Span of the balanced {...} region starting at `start` (which must point at
// '{'), or npos if the text ends before the braces balance.
std::size_t balanced_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) {
                return i;
            }
        }
    }
    return std::string_view::npos;
}

void scan_balanced_objects(std::string_view text, std::vector<json>& out) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        const std::size_t end = balanced_end(text, i);
        if (end == std::string_view::npos) {
            ++i;
            continue;
        }
        json j = json::parse(text.substr(i, end - i + 1), nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            out.push_back(std::move(j));
            i = end + 1;
        } else {
            ++i;
        }
    }
}

// Content of every ``` fenced block, fence language tags stripped.
std::vector<std::string_view> fenced_blocks(std::string_view text) {
    std::vector<std::string_view> blocks;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t open = text.find("```", pos);
        if (open == std::string_view::npos) {
            break;
        }
        std::size_t body = open + 3;
        // Optional language word, then up to end of line.
        while (body < text.size() && text[body] != '\n' && text[body] != '{') {
            ++body;
        }
        if (body < text.size() && text[body] == '\n') {
            ++body;
        }
        const std::size_t close = text.find("```", body);
        if (close == std::string_view::npos) {
            break;
        }
        blocks.push_back(text.substr(body, close - body));
        pos = close + 3;
    }
    return blocks;
}

}  // namespace

std::vector<json> extract_json_objects(const std::string& raw) {
    std::vector<json> out;

    const std::string_view whole = trim_view(raw);
    if (!whole.empty() && (whole.front() == '{' || whole.front() == '[')) {
        json j = json::parse(whole, nullptr, false);
        if (!j.is_discarded()) {
            if (j.is_object()) {
                out.push_back(std::move(j));
                return out;
            }
            if (j.is_array()) {
                for (auto& el : j) {
                    if (el.is_object()) {
                        out.push_back(std::move(el));
                    }
                }
                if (!out.empty()) {
                    return out;
                }
            }
        }
    }

    for (const auto& block : fenced_blocks(raw)) {
        scan_balanced_objects(block, out);
    }
    if (!out.empty()) {
        return out;
    }

    scan_balanced_objects(raw, out);
    return out;
}

std::optional<json> extract_first_json_object(const std::string& raw) {
    auto objs = extract_json_objects(raw);
    if (objs.empty()) {
        return std::nullopt;
    }
    return std::move(objs.front());
}

}  // namespace guardkit
