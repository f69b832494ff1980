#pragma once

// Flat run settings from key=value text or a JSON object, plus the typed
// readers the CLI applies to them.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "entrograph/error.hpp"
#include "json.hpp"

namespace entrograph {

using Settings = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace detail

// One "key = value" per line; '#' starts a comment; values may be quoted.
inline Settings parse_key_value(const std::string& text) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidConfig("line " + std::to_string(number) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw InvalidConfig("line " + std::to_string(number) + ": empty key");
    if (out.count(key)) throw InvalidConfig("line " + std::to_string(number) + ": duplicate key '" + key + "'");
    out[key] = detail::unquote(detail::trim(line.substr(eq + 1)));
  }
  return out;
}

// Scalars become their text; arrays of scalars become comma lists.
inline Settings settings_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  const auto scalar = [](const std::string& key, const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return v.dump();
    throw InvalidConfig("config key '" + key + "' must be a scalar or a list of scalars");
  };
  Settings out;
  for (const auto& [key, v] : j.items()) {
    if (v.is_array()) {
      std::string joined;
      for (const auto& x : v) joined += (joined.empty() ? "" : ",") + scalar(key, x);
      out[key] = joined;
    } else {
      out[key] = scalar(key, v);
    }
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (!json) return parse_key_value(buf.str());
  try {
    return settings_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(path + ": " + e.what());
  }
}

inline void reject_unknown(const Settings& s, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : s)
    if (!allowed.count(key)) throw InvalidConfig("unknown config key '" + key + "'");
}

inline long parse_integer(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno == ERANGE) throw InvalidConfig(key + ": not an integer: '" + text + "'");
  return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  const long v = parse_integer(key, text);
  if (v < 0) throw InvalidConfig(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

inline double parse_real(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno == ERANGE) throw InvalidConfig(key + ": not a number: '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidConfig(key + ": expected true or false, got '" + text + "'");
}

// "4..8" or "4,5,6"; strictly ascending and non-empty.
inline std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const long a = parse_integer("levels", detail::trim(text.substr(0, dots)));
    const long b = parse_integer("levels", detail::trim(text.substr(dots + 2)));
    if (b < a) throw InvalidConfig("levels: empty range '" + text + "'");
    for (long k = a; k <= b; ++k) out.push_back(static_cast<int>(k));
    return out;
  }
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const int k = static_cast<int>(parse_integer("levels", detail::trim(item)));
    if (!out.empty() && k <= out.back()) throw InvalidConfig("levels must be ascending");
    out.push_back(k);
  }
  if (out.empty()) throw InvalidConfig("levels must be non-empty");
  return out;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const nlohmann::json& config) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

}  // namespace entrograph
