#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nfship::cli {

// Exit codes of the nfship executable.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error (bad input, numeric failure)
inline constexpr int kExitUsage = 2;    // unknown subcommand or flag, bad flag value

// Runs one command line. `args` excludes the program name. Human-readable
// output, or JSON with --json, goes to `out`; errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nfship::cli
