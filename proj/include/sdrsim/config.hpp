#pragma once
// Shared reader for the line-oriented configuration files.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sdrsim {

struct ConfigEntry {
  int line;
  std::string key;
  std::string value;
};

/// Splits non-empty, non-comment ('#') lines into key/value pairs. Accepts
/// "key = value", "key=value" and "key value". Throws ConfigError on a line
/// without a value or on a repeated key.
std::vector<ConfigEntry> parse_entries(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

std::int64_t parse_int(const ConfigEntry& e, std::int64_t lo, std::int64_t hi);
double parse_double(const ConfigEntry& e);

}  // namespace sdrsim
