#include <iostream>

#include "hamgrad/cli.hpp"

int main(int argc, char** argv) { return hamgrad::cli::run(argc, argv, std::cout, std::cerr); }
