#include <iostream>

#include "sigcl/cli.hpp"

int main(int argc, char** argv) { return sigcl::cli::run(argc, argv, std::cout, std::cerr); }
