#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cospadi {

// Exit codes: 0 success, 2 configuration error (including bad flags),
// 3 data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cospadi
