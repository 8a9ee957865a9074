// SPDX-License-Identifier: Apache-2.0

#include "audiolab/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return audiolab::cli::run_command(args);
}
