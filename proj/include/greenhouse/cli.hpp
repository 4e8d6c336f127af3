#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace greenhouse::cli {

/// Exit codes returned by dispatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. `args` excludes the program name. Normal output goes
/// to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a flat `key = value` file (`#` starts a comment) and returns the
/// equivalent `--key=value` tokens. Underscores in keys become dashes.
/// Throws FormatError on a line without '='.
std::vector<std::string> config_tokens(const std::string& path);

}  // namespace greenhouse::cli
