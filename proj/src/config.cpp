#include "sdrsim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "sdrsim/error.hpp"

namespace sdrsim {

namespace {

std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::vector<ConfigEntry> parse_entries(std::string_view text) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    const std::string t = trimmed(s);
    if (t.empty()) continue;
    std::size_t split = t.find('=');
    std::string key, value;
    if (split != std::string::npos) {
      key = trimmed(std::string_view(t).substr(0, split));
      value = trimmed(std::string_view(t).substr(split + 1));
    } else {
      split = t.find_first_of(" \t");
      if (split == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": missing value for '" + t + "'");
      key = t.substr(0, split);
      value = trimmed(std::string_view(t).substr(split + 1));
    }
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(line) + ": malformed entry");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    out.push_back({line, std::move(key), std::move(value)});
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("error writing " + path);
}

std::int64_t parse_int(const ConfigEntry& e, std::int64_t lo, std::int64_t hi) {
  std::int64_t v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  int base = 10;
  if (e.value.size() > 2 && e.value[0] == '0' && (e.value[1] == 'x' || e.value[1] == 'X')) {
    base = 16;
    b += 2;
  }
  auto [p, ec] = std::from_chars(b, end, v, base);
  if (ec != std::errc{} || p != end)
    throw ConfigError("line " + std::to_string(e.line) + ": '" + e.key + "' expects an integer");
  if (v < lo || v > hi)
    throw ConfigError("line " + std::to_string(e.line) + ": '" + e.key + "' out of range");
  return v;
}

double parse_double(const ConfigEntry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e.line) + ": '" + e.key + "' expects a number");
  }
}

}  // namespace sdrsim
