#pragma once

// Command-line front end. The executable forwards to run_cli so the same
// commands can be driven in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace epbrm {

/// Runs one command (`args` excludes the program name). Returns the process
/// exit code: 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace epbrm
