#include <iostream>

#include "gwa/cli.hpp"

int main(int argc, char** argv) { return gwa::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
