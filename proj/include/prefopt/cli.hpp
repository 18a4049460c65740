#pragma once

#include <string>
#include <vector>

namespace prefopt {

// Command-line harness entry point. `args` are the program arguments in
// natural order, without the binary name. Returns the process exit code:
// 0 success, 1 usage error, 2 runtime/validation failure.
int run_cli(std::vector<std::string> args);

}  // namespace prefopt
