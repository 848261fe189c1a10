#include <iostream>

#include "mags/cli/cli.hpp"

int main(int argc, char** argv) { return mags::cli::run_cli(argc, argv, std::cout, std::cerr); }
