#include <iostream>

#include "storyalign/cli.hpp"

int main(int argc, char** argv) { return storyalign::cli::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
