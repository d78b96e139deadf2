#include <iostream>

#include "critter/pipeline/cli.hpp"

int main(int argc, char** argv) { return critter::pipeline::cli_main(argc, argv, std::cout, std::cerr); }
