#include <string>
#include <vector>

#include "lstd_lab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lstd_lab::cli::execute(std::move(args));
}
