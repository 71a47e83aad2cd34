#include <iostream>

#include "surfcp/cli.hpp"

int main(int argc, char** argv) { return surfcp::run_cli(argc, argv, std::cout, std::cerr); }
