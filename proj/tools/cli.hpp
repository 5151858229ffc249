#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ihfood::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

// Runs the ihfood command line. `args` excludes the program name. The
// one-line JSON summary goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ihfood::cli
