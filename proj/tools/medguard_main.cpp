#include <iostream>
#include <string>
#include <vector>

#include "medguard/cli/dispatch.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return medguard::cli::dispatch(args, std::cout, std::cerr);
}
