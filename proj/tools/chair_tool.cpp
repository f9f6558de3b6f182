#include <iostream>

#include "chair/cli.hpp"

int main(int argc, char** argv) {
  return chair::cli::run(argc, argv, std::cout, std::cerr);
}
