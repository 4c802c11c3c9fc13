#include "sparsebench/cli.hpp"

int main(int argc, char** argv) {
  return sparsebench::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
