#include <iostream>
#include <string>
#include <vector>

#include "gres2net/cli.hpp"

int main(int argc, char** argv) {
  return gres2net::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
