#include <iostream>
#include <vector>

#include "driftforge/cli.hpp"

int main(int argc, char** argv) {
  try {
    return driftforge::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
