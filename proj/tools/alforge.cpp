#include <iostream>

#include "alforge/experiment.hpp"

int main(int argc, char** argv) { return alforge::cli_main(argc, argv, std::cout, std::cerr); }
