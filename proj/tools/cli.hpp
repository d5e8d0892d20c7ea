#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gaussmix::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,       // invalid or conflicting flags
  kBadInput = 2,    // unreadable or malformed input, mismatched sizes
  kEmptyInput = 3,  // empty observation mask or empty input directory
};

/// Runs one invocation; args[0] is the program name. Results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gaussmix::cli
