#include <iostream>

#include "yakovenko/cli.hpp"

int main(int argc, char** argv) { return yakovenko::cli::run(argc, argv, std::cout, std::cerr); }
