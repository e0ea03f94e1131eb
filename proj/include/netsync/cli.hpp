#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netsync::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kNumericalError = 2;

/// Environment variable that overrides the configured seed when --seed is
/// not given.
inline constexpr const char* kSeedVariable = "NETSYNC_SEED";

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace netsync::cli
