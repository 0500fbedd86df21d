#include "rankgrad/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rankgrad {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg[key] = value;
  }
  return cfg;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const Config& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : cfg) out << k << " = " << v << "\n";
  return out.str();
}

bool has_key(const Config& cfg, const std::string& key) { return cfg.find(key) != cfg.end(); }

std::string get_string(const Config& cfg, const std::string& key, const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

std::string require_string(const Config& cfg, const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end()) throw ConfigError("missing required config key: " + key);
  return it->second;
}

double parse_double(const std::string& text, const std::string& context) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("invalid number for " + context + ": '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& context) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError("invalid unsigned integer for " + context + ": '" + text + "'");
  }
  return v;
}

double get_double(const Config& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : parse_double(it->second, key);
}

std::uint64_t get_u64(const Config& cfg, const std::string& key, std::uint64_t fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : parse_u64(it->second, key);
}

bool get_bool(const Config& cfg, const std::string& key, bool fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  const std::string& v = it->second;
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "' (use on/off)");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest form that still parses back to the same bits.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::vector<std::string> split_csv(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace rankgrad
