#include <iostream>

#include "truelift/cli.h"

int main(int argc, char** argv) {
  return truelift::cli::Run(argc, argv, std::cout, std::cerr);
}
