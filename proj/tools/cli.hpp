#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sagnac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConvergence = 3;

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`. Returns 0, 2 for input errors (including unknown
/// subcommands) or 3 for numerical non-convergence.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "5.65e-3" style: `digits` significant figures, unpadded exponent.
std::string sci(double value, int digits);

}  // namespace sagnac::cli
