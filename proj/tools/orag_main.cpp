#include <iostream>

#include "orag/io.hpp"

int main(int argc, char** argv) { return orag::cli_main(argc, argv, std::cout, std::cerr); }
