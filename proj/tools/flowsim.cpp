#include "flowsim/cli.hpp"

int main(int argc, char** argv) { return flowsim::cli::run_cli(argc, argv); }
