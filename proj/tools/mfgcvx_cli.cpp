#include <iostream>

#include "mfgcvx/cli.hpp"

int main(int argc, char** argv) { return mfgcvx::cli::main(argc, argv, std::cout, std::cerr); }
