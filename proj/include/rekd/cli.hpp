#pragma once

#include <string>
#include <vector>

namespace rekd {

// Dispatches one command line (without the program name). Returns the
// process exit code: 0 success, 1 configuration error, 2 runtime failure.
int run_command(const std::vector<std::string>& args);

}  // namespace rekd
