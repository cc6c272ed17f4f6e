#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace capypipe {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitIo = 2,
};

// Runs one `capypipe` invocation. `args` excludes the program name. Data goes
// to `out` (or --out files), diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

}  // namespace capypipe
