#include <iostream>

#include "dcl/tools/cli.hpp"

int main(int argc, char** argv) { return dcl::tools::run_cli(argc, argv, std::cout, std::cerr); }
