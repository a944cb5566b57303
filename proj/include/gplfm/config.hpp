#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gplfm {

/// Parses the TOML subset used by scenario files: [tables], [dotted.tables], bare/quoted/dotted
/// keys, strings, integers, floats (inf/nan included), booleans, arrays and inline tables.
/// Dates and arrays of tables are rejected.
nlohmann::json parse_toml(std::string_view text, const std::string& source = "<string>");

/// Loads a config by extension: .json is parsed as JSON, anything else as TOML.
nlohmann::json load_config(const std::filesystem::path& path);

/// FNV-1a 64 over the canonical (sorted-key, compact) JSON dump.
std::uint64_t config_hash(const nlohmann::json& config);
std::string config_hash_hex(const nlohmann::json& config);

}  // namespace gplfm
