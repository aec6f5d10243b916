#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace quim {

/// Flat TOML subset: `key = value` lines where the value is a basic
/// ("...") or literal ('...') string, integer, float, boolean or array of
/// those. '#' starts a comment. Tables are rejected.
///
/// Throws ConfigError naming the line on anything else, or a repeated key.
std::map<std::string, nlohmann::json> parse_flat_config(std::string_view text);

std::map<std::string, nlohmann::json> read_flat_config(const std::filesystem::path& path);

}  // namespace quim
