#pragma once

// key=value run configuration shared by the command-line tools. Strict on
// both sides: values must parse completely as their requested type, and any
// key the command never reads is an error rather than a silent no-op.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmnav {

// Raised for malformed or unknown configuration, as opposed to failures
// while doing the work; callers map the two to different exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  // Tokens of the form key=value; later duplicates win so command-line
  // overrides can follow file contents.
  static KeyValueConfig from_tokens(const std::vector<std::string>& tokens) {
    KeyValueConfig cfg;
    for (const std::string& tok : tokens) cfg.insert_token(tok);
    return cfg;
  }

  // One key=value per line; blank lines and #-comments allowed.
  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    KeyValueConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      std::size_t a = line.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      std::size_t b = line.find_last_not_of(" \t\r");
      cfg.insert_token(line.substr(a, b - a + 1));
    }
    return cfg;
  }

  void merge(const KeyValueConfig& overrides) {
    for (const auto& [k, v] : overrides.values_) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key: " + key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": not a number: " + it->second);
    }
    if (pos != it->second.size())
      throw ConfigError("key " + key + ": trailing characters: " + it->second);
    return v;
  }

  long long get_int(const std::string& key, long long fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &pos);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": not an integer: " + it->second);
    }
    if (pos != it->second.size())
      throw ConfigError("key " + key + ": trailing characters: " + it->second);
    return v;
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(it->second, &pos);
    } catch (const std::exception&) {
      throw ConfigError("key " + key + ": not a seed: " + it->second);
    }
    if (pos != it->second.size())
      throw ConfigError("key " + key + ": trailing characters: " + it->second);
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key " + key + ": not a boolean: " + it->second);
  }

  // Keys present but never requested by the command.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (used_.count(k) == 0) out.push_back(k);
    return out;
  }

  void require_all_used() const {
    const std::vector<std::string> extra = unused();
    if (extra.empty()) return;
    std::string msg = "unknown configuration keys:";
    for (const std::string& k : extra) msg += " " + k;
    throw ConfigError(msg);
  }

  // Everything that was set, for echoing into output artifacts.
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  void insert_token(const std::string& tok) {
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("expected key=value, got: " + tok);
    values_[tok.substr(0, eq)] = tok.substr(eq + 1);
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace lmnav
