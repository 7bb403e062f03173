#include "i2c/cli/commands.hpp"

int main(int argc, char** argv) { return i2c::cli::run_cli(argc, argv); }
