#include <iostream>

#include "relanet/cli.hpp"

int main(int argc, char** argv) {
  return relanet::cli::run_cli(argc, argv, std::cout, std::cerr);
}
