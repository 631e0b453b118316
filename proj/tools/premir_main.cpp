#include <iostream>
#include <string>
#include <vector>

#include "premir/cli.hpp"

int main(int argc, char** argv) {
  return premir::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
