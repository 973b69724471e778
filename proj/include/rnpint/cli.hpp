#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rnpint {

/// Command-line entry point: `simulate`, `fit`, `tune`, `evaluate`, `bench`.
/// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rnpint
