#include <iostream>
#include <string>
#include <vector>

#include "tutela/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tutela::run_cli(args, std::cout, std::cerr);
}
