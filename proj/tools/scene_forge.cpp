#include <iostream>

#include "scene_forge/cli.hpp"

int main(int argc, char** argv) { return scene_forge::cli::run(argc, argv, std::cout, std::cerr); }
