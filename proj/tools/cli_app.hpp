#pragma once

#include <ostream>

namespace kneadlab::cli {

// Exit codes: 0 success, 1 a check failed or a computation gave up, 2 usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kneadlab::cli
