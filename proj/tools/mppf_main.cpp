#include <iostream>
#include <string>
#include <vector>

#include "mppf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mppf::cli_main(args, std::cout, std::cerr);
}
