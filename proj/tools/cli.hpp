#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rdq::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

/// Runs one `rdq` invocation. Results go to `out` unless --output names a
/// file; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rdq::cli
