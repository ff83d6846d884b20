#pragma once

#include <string>
#include <vector>

namespace lfsal {

// Parses and executes one toolkit command (gen / train / eval / analyze).
// `args` excludes the program name. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args);

}  // namespace lfsal
