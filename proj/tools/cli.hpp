#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gcps::cli {

/// Exit codes of the gcps tool.
enum ExitCode : int { kOk = 0, kUsage = 1, kModelError = 2, kRuntimeError = 3 };

/// Seed used when --seed is not given.
inline constexpr unsigned long long kDefaultSeed = 42;

/// Runs the tool on `args` (args[0] is the program name). Results go to the
/// --out file or `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gcps::cli
