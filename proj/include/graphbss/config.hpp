#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "graphbss/errors.hpp"

namespace graphbss {

/** Malformed or inconsistent run configuration. CLI exit code 2. */
class ConfigError : public ParameterError {
 public:
  explicit ConfigError(const std::string& what) : ParameterError(what) {}
};

/**
 * Flat key-value run configuration.
 *
 * Syntax, one entry per line:
 *
 *     # comment (also allowed after a value)
 *     experiment = fig2
 *     fig2.theta2 = 0.01:0.4:0.01      # range start:stop:step, stop inclusive
 *     fig3.n = 250, 500, 1000          # comma list
 *
 * Keys are dotted lowercase words. Values keep everything between '=' and the
 * first '#', trimmed. Duplicate keys are rejected so a typo cannot silently
 * lose an override.
 */
class Config {
 public:
  Config() = default;

  static Config parse_string(const std::string& text, const std::string& origin = "<inline>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = origin + ":" + std::to_string(lineno);
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected 'key = value' at " + where);
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("missing key at " + where);
      if (value.empty()) throw ConfigError("missing value for '" + key + "' at " + where);
      for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
          throw ConfigError("invalid key character in '" + key + "' at " + where);
      if (cfg.values_.count(key))
        throw ConfigError("duplicate key '" + key + "' at " + where);
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(get_string(key), key); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_int(const std::string& key) const { return to_int(get_string(key), key); }
  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string text = get_string(key);
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(text, &pos);
      if (pos != text.size()) throw ConfigError("");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + text +
                        "'");
    }
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
  }

  /** Comma-separated strings; empty pieces are rejected. */
  std::vector<std::string> get_string_list(const std::string& key) const {
    std::vector<std::string> out;
    for (const std::string& piece : split(get_string(key), key)) out.push_back(piece);
    return out;
  }

  /**
   * Comma-separated numbers where each piece may be a start:stop:step range
   * (stop inclusive up to rounding; a grid point is snapped to the nearby
   * multiple of the step when that prints shorter, so sweep coordinates like
   * 0.1 compare exactly to their literals).
   */
  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& piece : split(get_string(key), key)) {
      const std::size_t c1 = piece.find(':');
      if (c1 == std::string::npos) {
        out.push_back(to_double(piece, key));
        continue;
      }
      const std::size_t c2 = piece.find(':', c1 + 1);
      if (c2 == std::string::npos)
        throw ConfigError("config key '" + key + "' range needs start:stop:step, got '" + piece +
                          "'");
      const double start = to_double(piece.substr(0, c1), key);
      const double stop = to_double(piece.substr(c1 + 1, c2 - c1 - 1), key);
      const double step = to_double(piece.substr(c2 + 1), key);
      if (!(step > 0.0) || stop < start - step * 1e-9)
        throw ConfigError("config key '" + key + "' has an empty or descending range '" + piece +
                          "'");
      const long count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
      for (long k = 0; k <= count; ++k) {
        double v = start + static_cast<double>(k) * step;
        // prefer the nearby multiple of the step only when it prints shorter,
        // so 0.01:0.4:0.01 yields a point equal to the literal 0.1 while a
        // start like 0.3 is never nudged onto 0.30000000000000004
        const double snapped = std::round(v / step) * step;
        if (std::abs(snapped - v) <= step * 1e-9 && repr_len(snapped) < repr_len(v)) v = snapped;
        out.push_back(v);
      }
    }
    return out;
  }

  std::vector<long> get_int_list(const std::string& key) const {
    std::vector<long> out;
    for (const std::string& piece : split(get_string(key), key)) out.push_back(to_int(piece, key));
    return out;
  }

  /** Rejects any present key that is not in the allowed set (typo guard). */
  void check_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_) {
      (void)value;
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static std::vector<std::string> split(const std::string& text, const std::string& key) {
    std::vector<std::string> out;
    std::string piece;
    std::istringstream in(text);
    while (std::getline(in, piece, ',')) {
      const std::string t = trim(piece);
      if (t.empty()) throw ConfigError("config key '" + key + "' has an empty list element");
      out.push_back(t);
    }
    if (out.empty()) throw ConfigError("config key '" + key + "' has an empty value");
    return out;
  }

  static double to_double(const std::string& text, const std::string& key) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size() || !std::isfinite(v)) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a finite number, got '" + text + "'");
    }
  }

  /** Length of the shortest round-trip decimal form. */
  static std::size_t repr_len(double v) {
    char buf[32];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof buf, v);
    return static_cast<std::size_t>(res.ptr - buf);
  }

  static long to_int(const std::string& text, const std::string& key) {
    try {
      std::size_t pos = 0;
      const long v = std::stol(text, &pos);
      if (pos != text.size()) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace graphbss
