#include <iostream>
#include <string>
#include <vector>

#include "prefixevo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return prefixevo::run_cli(args, std::cout, std::cerr);
}
