#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace domaincraft {

// Runs one command line (without the program name). Errors are reported on
// `err` as a single line, `domaincraft: error: <kind>: <message>`.
// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace domaincraft
