#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace loopsoup::cli {

/// A config problem, located by line and field. Line 0 is a command-line
/// override, -1 a default value, -2 a missing key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Flat `key = value` experiment description. A key may be prefixed with a
/// job name (`lejan.samples = 200000`) to override it for that job only.
class Config {
 public:
  static Config parse(std::istream& in, std::string source);
  static Config load(const std::filesystem::path& path);

  /// Applies a `key=value` override from the command line.
  void set(const std::string& assignment);

  bool has(const std::string& job, const std::string& key) const;
  std::string text(const std::string& job, const std::string& key) const;
  long integer(const std::string& job, const std::string& key) const;
  double real(const std::string& job, const std::string& key) const;
  bool flag(const std::string& job, const std::string& key) const;
  /// Whitespace- or comma-separated integers.
  std::vector<int> integers(const std::string& job, const std::string& key) const;
  /// Groups of integers separated by `|`.
  std::vector<std::vector<int>> groups(const std::string& job, const std::string& key) const;

  std::vector<std::string> jobs() const;

  /// Throws a ConfigError pointing at the line that set the key.
  [[noreturn]] void reject(const std::string& job, const std::string& key, const std::string& message) const;

  /// Every key with its effective value, defaults included, sorted.
  std::map<std::string, std::string> resolved() const;
  std::string resolved_text() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& job, const std::string& key) const;
  Entry require(const std::string& job, const std::string& key) const;
  void assign(const std::string& key, std::string value, int line);
  [[noreturn]] void fail(const Entry* e, const std::string& field, const std::string& message) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

struct RunOptions {
  std::filesystem::path out = "loopsoup-out";
  bool parallel = false;
  bool quiet = false;
};

struct RunResult {
  nlohmann::ordered_json report;
  /// Some check that is not a positive control failed.
  bool failed = false;
};

/// Runs every job of the config in order and writes report.json, the
/// resolved config and the CSV/JSONL outputs into options.out.
RunResult run(const Config& config, const RunOptions& options);

const std::vector<std::string>& job_names();

}  // namespace loopsoup::cli
