#pragma once

#include <string>
#include <vector>

namespace stylecloak {

// Entry point shared by the binary and the CLI tests. argv[0] is the
// program name. Exit codes: 0 success, 1 usage/config error, 2 at least
// one batch item failed.
int run_cli(const std::vector<std::string>& argv);

}  // namespace stylecloak
