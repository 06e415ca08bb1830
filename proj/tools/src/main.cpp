#include <iostream>

#include "benchdelta/cli.hpp"

int main(int argc, char** argv) { return benchdelta::cli::run(argc, argv, std::cout, std::cerr); }
