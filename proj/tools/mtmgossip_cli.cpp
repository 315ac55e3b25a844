#include <iostream>
#include <string>
#include <vector>

#include "mtmgossip/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mtmgossip::cli_main(args, std::cout, std::cerr);
}
