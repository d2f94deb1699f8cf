#include <string>
#include <vector>

#include "ertn/experiment.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ertn::run_cli(args);
}
