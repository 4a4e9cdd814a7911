#include "guardkit/template_engine.hpp"

#include "guardkit/errors.hpp"
#include "guardkit/jsonl.hpp"

namespace guardkit {

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    for (;;) {
        const std::size_t open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        const std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) {
            throw ConfigError("unterminated {{ placeholder in template");
        }
        out.append(tmpl, pos, open - pos);
        const std::string name = tmpl.substr(open + 2, close - open - 2);
        const auto it = vars.find(name);
        if (it == vars.end()) {
            throw ConfigError("template placeholder has no value: {{" + name + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::map<std::string, int> template_placeholders(const std::string& tmpl) {
    std::map<std::string, int> names;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t open = tmpl.find("{{", pos);
        if (open == std::string::npos) {
            break;
        }
        const std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string::npos) {
            throw ConfigError("unterminated {{ placeholder in template");
        }
        names[tmpl.substr(open + 2, close - open - 2)]++;
        pos = close + 2;
    }
    return names;
}

std::string load_template_file(const std::filesystem::path& path) {
    return read_text_file(path);
}

}  // namespace guardkit
