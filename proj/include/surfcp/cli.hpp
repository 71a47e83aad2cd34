#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage or argument error,
// 3 data / I/O / dimension error, 4 numerical failure (singular,
// degenerate, other numerical). Errors are reported on `err` as
// "error [module.operation]: message".

#include <iosfwd>
#include <string>
#include <vector>

#include "surfcp/errors.hpp"

namespace surfcp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorKind kind) noexcept;

/// argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace surfcp
