#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdrl/errors.hpp"

namespace fdrl {

/// Flat key-value configuration. Files may group keys under [section]
/// headers; sections are cosmetic and keys stay globally unique.
/// `--set key=value` overrides are applied on top, and the effective
/// configuration is echoed as sorted key=value lines.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& key_eq_value);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Sorted key=value lines, one per key, trailing newline.
  std::string echo() const;

  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }

  /// Throws ConfigError when a key is not in `allowed` (typo guard).
  void require_known_keys(const std::vector<std::string>& allowed) const;

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

}  // namespace fdrl
