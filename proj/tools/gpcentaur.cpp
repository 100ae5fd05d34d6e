#include <iostream>

#include "gpcentaur/cli.hpp"

int main(int argc, char** argv) { return gpc::run_cli(argc, argv, std::cout, std::cerr); }
