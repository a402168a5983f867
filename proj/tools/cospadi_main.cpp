#include <iostream>

#include "cospadi/cli.hpp"

int main(int argc, char** argv) { return cospadi::run_cli(argc, argv, std::cout, std::cerr); }
