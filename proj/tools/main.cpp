#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ifeatt::cli::cli_main(argc, argv, std::cout, std::cerr); }
