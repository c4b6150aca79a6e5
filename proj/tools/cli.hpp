#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace keyshap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitOracle = 4;

// Entry point shared by the executable and the in-process tests. `args`
// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace keyshap::cli
