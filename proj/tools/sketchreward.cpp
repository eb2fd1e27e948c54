#include <iostream>

#include "sketchreward/cli.hpp"

int main(int argc, char** argv) { return sketchreward::cli::run(argc, argv, std::cout, std::cerr); }
