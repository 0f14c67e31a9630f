#include "ctrirl/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ctrirl::cli_main(argc, argv, std::cout, std::cerr); }
