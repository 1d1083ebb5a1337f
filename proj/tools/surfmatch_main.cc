#include <iostream>
#include <string>
#include <vector>

#include "surfmatch/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return surfmatch::cli::Run(args, std::cout, std::cerr);
}
