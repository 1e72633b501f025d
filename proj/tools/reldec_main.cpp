#include <iostream>

#include "reldec/cli.hpp"

int main(int argc, char** argv) { return reldec::run_cli(argc, argv, std::cout, std::cerr); }
