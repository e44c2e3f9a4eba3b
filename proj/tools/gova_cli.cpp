#include <iostream>

#include "gova/cli.hpp"

int main(int argc, char** argv) { return gova::run_cli(argc, argv, std::cout, std::cerr); }
