#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace guardkit {

// Fills {{name}} placeholders. A placeholder without a matching variable is
// a ConfigError; unused variables are fine.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

// Placeholder names appearing in a template, for --dry-run validation.
std::map<std::string, int> template_placeholders(const std::string& tmpl);

std::string load_template_file(const std::filesystem::path& path);

}  // namespace guardkit
