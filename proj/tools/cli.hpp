#pragma once

#include <string>
#include <vector>

namespace microtopt::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kSolverFailure = 2,
  kGradcheckFailure = 3,
};

/// Runs the command line front end; args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace microtopt::cli
