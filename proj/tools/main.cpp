#include <vector>

#include "psilab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return psilab::cli_main(args);
}
