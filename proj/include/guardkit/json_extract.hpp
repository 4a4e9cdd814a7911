#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace guardkit {

// Pulls JSON objects out of noisy model output. Search order:
//   1. the whole (trimmed) string, accepting a single object or an array
//      of objects;
//   2. fenced ``` code blocks, scanning each for balanced objects;
//   3. a balanced-brace scan over the full text.
// The first stage that yields anything wins. Balanced scanning is
// string- and escape-aware, and resumes after each successfully parsed
// object so nested objects are not double-counted.
std::vector<nlohmann::json> extract_json_objects(const std::string& raw);

std::optional<nlohmann::json> extract_first_json_object(const std::string& raw);

}  // namespace guardkit
