#include <iostream>

#include "cogdiag/cli.hpp"

int main(int argc, char** argv) { return cogdiag::cli::run(argc, argv, std::cout, std::cerr); }
