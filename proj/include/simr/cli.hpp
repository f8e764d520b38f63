#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace simr::cli {

/// Runs one command line (args excludes the program name). Returns the
/// process exit code: 0 success, 2 data or usage error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace simr::cli
