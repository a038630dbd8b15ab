#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "cctree/error.hpp"

namespace cctree::cli {

/// Process exit status for a library error: 2 for bad input data, 3 for
/// estimation failures, 4 for bad configuration.
int exit_code(ErrorCode code);

/// Runs one command line (args[0] is the program name). Diagnostics go to err;
/// failures print a single `error code=<name> exit=<n> message="..."` line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cctree::cli
