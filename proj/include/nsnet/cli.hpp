#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct CommandOutcome {
  int exit_code = kExitOk;
  /// Text destined for the error stream.
  std::string diagnostics;
};

/// Runs one subcommand. `argv[0]` is the program name. Normal output (help,
/// summaries) goes to `out`.
CommandOutcome run(const std::vector<std::string>& argv, std::ostream& out);

}  // namespace nsnet::cli
