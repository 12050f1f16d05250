#include <iostream>

#include "globenet/cli.hpp"

int main(int argc, char** argv) { return globenet::run_cli(argc, argv, std::cout, std::cerr); }
