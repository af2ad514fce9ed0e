#pragma once

// `key = value` configuration files. Lines starting with '#' and text after
// an unquoted '#' are comments; values may be wrapped in double quotes.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "sido/error.hpp"

namespace sido::config {

class KeyValues {
 public:
  KeyValues() = default;
  explicit KeyValues(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  static KeyValues parse(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string body;
      bool quoted = false;
      for (char c : line) {
        if (c == '"') quoted = !quoted;
        if (c == '#' && !quoted) break;
        body += c;
      }
      body = trim(body);
      if (body.empty() || body.front() == '[') continue;  // section headers are ignored
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("CONFIG", "line " + std::to_string(line_no) + ": expected key = value");
      }
      std::string key = trim(body.substr(0, eq));
      std::string value = trim(body.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (key.empty()) throw ValidationError("CONFIG", "line " + std::to_string(line_no) + ": empty key");
      out[key] = value;
    }
    return KeyValues(std::move(out));
  }

  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size()) {
      throw ValidationError("CONFIG", "key '" + key + "' is not a number: " + it->second);
    }
    return v;
  }

  std::optional<double> get_optional_double(const std::string& key) const {
    if (!contains(key)) return std::nullopt;
    return get_double(key, 0.0);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size()) {
      throw ValidationError("CONFIG", "key '" + key + "' is not an integer: " + it->second);
    }
    return v;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{} || p != it->second.data() + it->second.size()) {
      throw ValidationError("CONFIG", "key '" + key + "' is not an unsigned integer: " + it->second);
    }
    return v;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace sido::config
