#include <iostream>
#include <string>
#include <vector>

#include "nfship/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nfship::cli::run(args, std::cout, std::cerr);
}
