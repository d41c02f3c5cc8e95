#pragma once

// Experiment configuration: `key = value` lines, `#` starts a comment.
// Keys are checked against the defaults table so typos fail loudly.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace iob::harness {

class Config {
 public:
  /// Throws std::invalid_argument with the line number on malformed lines
  /// or repeated keys.
  static Config parse(std::istream& is, std::string_view origin = "config");
  static Config load(const std::string& path);

  void set(const std::string& key, std::string value) { kv_[key] = std::move(value); }
  bool has(std::string_view key) const { return kv_.count(std::string(key)) != 0; }
  /// Throws std::out_of_range for a missing key.
  const std::string& get(std::string_view key) const;

  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  std::vector<std::uint64_t> get_u64_list(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key) const;

  const std::map<std::string, std::string>& values() const { return kv_; }

  /// Overlays `other` onto this config. Keys unknown to this config are
  /// rejected unless they start with one of `open_prefixes`.
  void merge(const Config& other, const std::vector<std::string>& open_prefixes = {});

  /// SHA-256 (hex) over the sorted `key=value\n` lines.
  std::string hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

/// Every key an experiment reads, with its default.
Config default_config();

}  // namespace iob::harness
