#pragma once

#include <string>
#include <vector>

namespace fadv::cli {

/// Full command-line driver. `args` excludes the program name. Returns the
/// process exit code: 0 on success, 1 for config or usage problems, 2 for a
/// missing checkpoint.
int run(std::vector<std::string> args);

}  // namespace fadv::cli
