#include <iostream>
#include <string>
#include <vector>

#include "acesearcher/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return acesearcher::dispatch(args, std::cout, std::cerr);
}
