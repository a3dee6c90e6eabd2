#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace plansmith::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point for the `plansmith` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace plansmith::cli
