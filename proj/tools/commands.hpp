#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lect::cli {

/// Runs the command line (args exclude the program name) and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lect::cli
