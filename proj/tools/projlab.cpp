#include <iostream>

#include "projlab/cli.hpp"

int main(int argc, char** argv) { return projlab::cli_main(argc, argv, std::cout, std::cerr); }
