#pragma once

namespace adlgen {

// Full command-line surface; returns the process exit code. Failures print a
// single machine-readable "error: ..." line on stderr and return nonzero.
int run_cli(int argc, char** argv);

}  // namespace adlgen
