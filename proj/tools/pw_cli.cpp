#include <iostream>

#include "pw/cli.hpp"

int main(int argc, char** argv) { return pw::cli::run_cli(argc, argv, std::cout, std::cerr); }
