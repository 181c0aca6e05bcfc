#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace nervemp::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalidInput = 2,
  kNumericalFailure = 3,
  kInternalError = 4,
};

// Library errors map by category; anything else is an internal error.
int exit_code_for(const std::exception& e);

// Runs the command line `args` (without the program name). Never throws;
// every failure is mapped to an exit code with a message on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nervemp::cli
