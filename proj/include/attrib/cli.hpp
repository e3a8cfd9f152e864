#pragma once

#include <string>
#include <vector>

namespace attrib::cli {

// Runs one subcommand; args exclude argv[0]. Returns the process exit code:
// 0 success, 1 usage/config error, 2 data validation failure, 3 numerical
// failure.
int run(const std::vector<std::string>& args);

}  // namespace attrib::cli
