#include <iostream>
#include <string>
#include <vector>

#include "chart_refinery/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return chart_refinery::cli::run(args, std::cout, std::cerr);
}
