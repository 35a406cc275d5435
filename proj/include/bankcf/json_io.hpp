#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace bankcf {

using Json = nlohmann::json;

// Deterministic rendering: keys sorted, two-space indent, floating-point
// numbers with exactly six decimals, integers as integers, NaN/inf as null.
std::string canonical_json(const Json& value);

// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::string fixed6(double v);

}  // namespace bankcf
