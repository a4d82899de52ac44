#include "lightrec/cli.hpp"

int main(int argc, char** argv) {
  return lightrec::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
