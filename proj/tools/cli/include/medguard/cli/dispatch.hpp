#pragma once

#include <ostream>
#include <span>
#include <string>

namespace medguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 64;

/// Entry point behind the `medguard` binary. args[0] is the program name.
/// Returns the process exit code; never calls exit().
int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace medguard::cli
