#ifndef TRUELIFT_CLI_H_
#define TRUELIFT_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace truelift::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeError = 2;

// Runs `truelift <subcommand> [flags]`. Subcommands: gen, train, eval,
// gradcheck, plot-data. Every subcommand accepts --config FILE with
// `key = value` lines; flags on the command line take precedence.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace truelift::cli

#endif  // TRUELIFT_CLI_H_
