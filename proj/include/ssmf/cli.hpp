#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssmf::cli {

/// Runs one command line (args exclude the program name). Errors are reported
/// on `err` as `error: kind=<Kind> message="<text>"`. Returns the exit code:
/// 0 success, 2 input or configuration error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ssmf::cli
