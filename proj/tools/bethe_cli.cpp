#include <iostream>

#include "bethe/cli.hpp"

int main(int argc, char** argv) { return bethe::cli::main_entry(argc, argv, std::cout, std::cerr); }
