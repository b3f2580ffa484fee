#include <iostream>
#include <string>
#include <vector>

#include "nsnet/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  const auto outcome = nsnet::cli::run(args, std::cout);
  std::cerr << outcome.diagnostics;
  return outcome.exit_code;
}
