#include <iostream>

#include "rolecheck/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rolecheck::dispatch(args, std::cout, std::cerr);
}
