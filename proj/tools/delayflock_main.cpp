#include <iostream>

#include "delayflock/cli.hpp"

int main(int argc, char** argv) {
  return delayflock::runCli(argc, argv, std::cout, std::cerr);
}
