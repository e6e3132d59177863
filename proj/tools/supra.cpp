#include <iostream>

#include "supra/cli.hpp"

int main(int argc, char** argv) { return supra::cli::run(argc, argv, std::cout, std::cerr); }
