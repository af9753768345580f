#pragma once

#include <iosfwd>

namespace rlsched::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitModel = 3;
inline constexpr int kExitDiverged = 4;

// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rlsched::cli
