#include <iostream>

#include "bayesd/cli.hpp"

int main(int argc, char** argv) { return bayesd::cli::run(argc, argv, std::cout, std::cerr); }
