#include <iostream>

#include "socsim/cli.hpp"

int main(int argc, char** argv) { return soc::cli::run_cli(argc, argv, std::cout, std::cerr); }
