#include <iostream>

#include "facepipe/cli.hpp"

int main(int argc, char** argv) {
  return facepipe::cli::run(argc, argv, std::cout, std::cerr);
}
