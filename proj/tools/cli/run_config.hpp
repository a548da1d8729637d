#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace andikit::cli {

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitMissingInput = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with dotted keys. Every key read through
/// a getter is recorded, with its default when absent, so the resolved
/// configuration of a run can be written out.
class RunConfig {
 public:
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);

  /// `key=value` override; replaces any value from the file.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);

  /// Resolved keys, sorted, one `key = value` per line.
  std::string resolved_text() const;
  /// Keys that were supplied but never read.
  std::vector<std::string> unused_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::optional<std::string> lookup(const std::string& key);
  void note(const std::string& key, const std::string& value) { resolved_[key] = value; }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
};

std::string format_double(double v);

}  // namespace andikit::cli
