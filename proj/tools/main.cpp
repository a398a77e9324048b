#include <string>
#include <vector>

#include "ps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ps::run_cli(args);
}
