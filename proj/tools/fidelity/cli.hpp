#pragma once

#include <string>
#include <vector>

namespace fidelity::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kBackend = 3, kPartial = 4 };

/// Runs the `fidelity` command line; args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace fidelity::cli
