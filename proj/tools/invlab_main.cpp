#include <iostream>

#include "invlab/experiments.hpp"

int main(int argc, char** argv) { return invlab::run_cli(argc, argv, std::cout, std::cerr); }
