#include <iostream>

#include "afr/cli.hpp"

int main(int argc, char** argv) { return afr::dispatch(argc, argv, std::cout, std::cerr); }
