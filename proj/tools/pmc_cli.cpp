#include <iostream>

#include "pmc/cli.hpp"

int main(int argc, char** argv) { return pmc::cli_dispatch(argc, argv, std::cout, std::cerr); }
