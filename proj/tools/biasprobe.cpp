#include <iostream>
#include <string>
#include <vector>

#include "biasprobe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return biasprobe::cli::run_pipeline(args, std::cout, std::cerr).exit_code;
}
