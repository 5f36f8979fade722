#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hft::cli {

// Process exit codes; stable for scripting.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,         // bad flags or unreadable/unwritable paths
  kData = 3,          // unusable input data
  kOptimization = 4,  // optimizer failure
  kTrackingLost = 5,
};

// Entry point used by the `hft` binary.
int run(int argc, char** argv);

// Same, with explicit argument list (subcommand first) and output streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hft::cli
