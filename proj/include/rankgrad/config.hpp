#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankgrad {

// Raised for malformed config files, bad keys, and out-of-range settings.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Flat key=value configuration. std::map keeps serialization order stable.
using Config = std::map<std::string, std::string>;

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
Config parse_config_text(const std::string& text);
Config parse_config_file(const std::string& path);

// Canonical "key = value\n" form; parse(serialize(c)) == c.
std::string serialize_config(const Config& cfg);

bool has_key(const Config& cfg, const std::string& key);
std::string get_string(const Config& cfg, const std::string& key, const std::string& fallback);
std::string require_string(const Config& cfg, const std::string& key);
double get_double(const Config& cfg, const std::string& key, double fallback);
std::uint64_t get_u64(const Config& cfg, const std::string& key, std::uint64_t fallback);
bool get_bool(const Config& cfg, const std::string& key, bool fallback);  // on/off, true/false, 1/0

// Splits "a,b,c" into trimmed tokens; empty string gives an empty list.
std::vector<std::string> split_csv(const std::string& text, char sep = ',');

// Shortest representation that round-trips the double exactly ("%.17g").
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);
std::uint64_t parse_u64(const std::string& text, const std::string& context);

}  // namespace rankgrad
