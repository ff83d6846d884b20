#include <string>
#include <vector>

#include "lfsal/cli.hpp"

int main(int argc, char** argv) {
  return lfsal::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
