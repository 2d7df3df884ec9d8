#include <iostream>
#include <string>
#include <vector>

#include "pprsim/config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pprsim::run_cli(args, std::cout, std::cerr);
}
