#pragma once

#include <string>
#include <vector>

namespace aikd {

// Entry point shared by the binary and the tests. args excludes the program
// name. Returns the process exit code: 0 success, 1 internal error,
// 2 user/config error.
int run_cli(const std::vector<std::string>& args);

}  // namespace aikd
