#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tiba/kv_config.hpp"
#include "tiba/pipeline.hpp"

namespace tiba {

inline constexpr std::string_view kRunLogFormat = "tiba-runlog/1";

/// First line of every log: seed, the full flat configuration and its hash.
struct LogHeader {
  std::string format{kRunLogFormat};
  std::uint64_t seed = 0;
  KvConfig config;

  std::string config_hash() const;
  friend bool operator==(const LogHeader& a, const LogHeader& b) {
    return a.format == b.format && a.seed == b.seed && a.config.entries() == b.config.entries();
  }
};

/// Newline-delimited JSON run log. Records must arrive in nondecreasing
/// simulation time; anything else is a CorruptLog.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(LogHeader header) : header_(std::move(header)) {}

  void record(RunRecord rec);

  const LogHeader& header() const { return header_; }
  const std::vector<RunRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  /// Throws ConfigError on empty input and CorruptLog on malformed content.
  static RunLog read(std::istream& in);
  static RunLog load(const std::filesystem::path& path);

 private:
  LogHeader header_;
  std::vector<RunRecord> records_;
};

std::string serialize_header(const LogHeader& h);
LogHeader parse_header(std::string_view line);
std::string serialize_record(const RunRecord& rec);
RunRecord parse_record(std::string_view line);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace tiba
