#include <iostream>

#include "asif_cli/cli.hpp"

int main(int argc, char** argv) { return asif::cli::run(argc, argv, std::cout, std::cerr); }
