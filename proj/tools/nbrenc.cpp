#include "nbrenc/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return nbrenc::cli::run_cli(argc, argv, std::cout, std::cerr); }
