#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tiba {

/// Flat `key = value` configuration. Lines starting with `#` are comments.
/// Keys may repeat (e.g. `crevice`); lookups of single values take the last
/// occurrence.
class KvConfig {
 public:
  using Entry = std::pair<std::string, std::string>;

  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;
  std::vector<std::string> all(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  /// Replaces every occurrence of `key` with a single entry.
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void add(std::string key, std::string value);
  void erase(std::string_view key);

  const std::vector<Entry>& entries() const { return entries_; }
  std::string to_text() const;
  std::uint64_t hash() const;

 private:
  std::vector<Entry> entries_;
};

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Strict parse of the whole string; nullopt on anything else.
std::optional<double> parse_double(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace tiba
