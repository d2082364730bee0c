#pragma once

#include <ostream>

namespace dcl::tools {

// Process exit codes of the `dcl` command.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,    // bad arguments or configuration
  kExitData = 2,     // unreadable or inconsistent dataset, checkpoint or file
  kExitNumeric = 3,  // non-finite loss, degenerate activations or failed gradient check
};

// Entry point of `dcl gen-data | pretrain | train | eval | gradcheck`.
// Results go to `out`, diagnostics and timings to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dcl::tools
