#include <iostream>
#include <string>
#include <vector>

#include "spatialgen/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return spatialgen::run_cli(args, std::cout, std::cerr);
}
