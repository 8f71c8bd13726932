#include "commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return mfglab::run_cli(argc, argv, std::cout, std::cerr); }
