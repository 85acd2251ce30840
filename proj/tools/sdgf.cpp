#include <iostream>

#include "sdgf/cli.hpp"

int main(int argc, char** argv) { return sdgf::run_cli(argc, argv, std::cout, std::cerr); }
