#include "nscomp/cli/app.hpp"

int main(int argc, char** argv) { return nscomp::run_cli(argc, argv); }
