#pragma once

namespace nscomp {

// Parses the command line and runs one subcommand. Returns the process exit
// code: 0 success, 1 runtime failure (or failed verify checks), 2 usage.
int run_cli(int argc, char** argv);

}  // namespace nscomp
