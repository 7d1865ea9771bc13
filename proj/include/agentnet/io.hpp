#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace agentnet {

// Writes through a sibling temp file and renames it over `path`. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// One JSON value per non-empty line; a parse failure throws IoError with
// "<path>:<line>: ..." in the message.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

} // namespace agentnet
