#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace guardkit {

using json = nlohmann::json;

// Canonical serialization: compact dump with nlohmann's alphabetically
// ordered object keys. Every artifact the toolkit writes goes through this,
// which is what makes reruns byte-comparable.
std::string dump_canonical(const json& j);

// Line-delimited records: UTF-8, one JSON object per line.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

// Single-document variants for manifests and reports.
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace guardkit
