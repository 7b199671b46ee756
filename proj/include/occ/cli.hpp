#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace occ {

/// Exit statuses of `occ`.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitSpp = 4 };

/// Stage names accepted by run().
const std::vector<std::string>& stage_names();

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Throws InvalidArgument on a line without '=' or a repeated key.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Validated, flat, dotted-key configuration of one stage run.
struct RunConfig {
  std::string stage;
  std::map<std::string, std::string> values;

  /// Reads `file` (may be empty), applies `key=value` overrides, and rejects
  /// keys that the stage does not know.
  static RunConfig load(const std::string& stage, const std::string& file, const std::vector<std::string>& overrides);
  static RunConfig from_map(const std::string& stage, std::map<std::string, std::string> values);

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string str(const std::string& key, const std::string& fallback = "") const;
  double num(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key) const;
};

/// Output root: $OCC_OUT_DIR, or the working directory.
std::string output_root();

/// Runs one stage. Progress goes to `out`, the diagnostic line of a failure to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace occ
