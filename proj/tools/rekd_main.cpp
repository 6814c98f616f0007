#include "rekd/cli.hpp"

int main(int argc, char** argv) {
  return rekd::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
