#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace priorweaver::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int schema = 3;
inline constexpr int domain = 4;
inline constexpr int mismatch = 5;
}  // namespace exit_code

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace priorweaver::cli
