#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scsc::cli {

enum ExitCode : int { ok = 0, usage = 1, io = 2, numerical = 3 };

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scsc::cli
