#include <iostream>

#include "kwc/cli.hpp"

int main(int argc, char** argv) { return kwc::cli::main_entry(argc, argv, std::cout, std::cerr); }
