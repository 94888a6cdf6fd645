#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tland::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationError = 2,
  kInternalError = 3,
};

// args excludes the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tland::cli
