#include <iostream>
#include <string>
#include <vector>

#include "vecoff/runner.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vecoff::cli::run(args, std::cout, std::cerr);
}
