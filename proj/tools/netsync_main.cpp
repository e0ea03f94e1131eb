#include <iostream>
#include <string>
#include <vector>

#include "netsync/cli.hpp"

int main(int argc, char** argv) {
  return netsync::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
