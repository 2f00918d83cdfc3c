// Flat `key = value` configuration text with `#` comments.

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>

namespace soc {

using KeyValues = std::map<std::string, std::string>;

/// Blank lines and text after `#` are ignored. A later duplicate key wins.
/// Throws ConfigError naming the line for anything that is not `key = value`.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

double parse_real(const std::string& key, const std::string& value);
std::int64_t parse_integer(const std::string& key, const std::string& value);
std::uint64_t parse_unsigned(const std::string& key, const std::string& value);

}  // namespace soc
