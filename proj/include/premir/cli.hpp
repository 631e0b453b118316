#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace premir {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr int kConfigVersion = 1;

/// Runs one `premir` invocation (args[0] is the program name). Results go to
/// `out`, diagnostics to `err`. Returns the exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace premir
