#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace survcbps::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kDataError = 2,
  kConvergenceError = 3,
  kDegenerateData = 4,
};

// Runs the command line `args` (args[0] is the program name) writing normal
// output to `out` and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace survcbps::cli
