// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace audiolab::cli {

// Full command-line entry point (argv without the program name).
// Subcommands: make-corpus, train-captioner, bootstrap, pretrain,
// finetune-retrieval, finetune-classifier, eval-retrieval, eval-zero-shot,
// eval-caption, gradcheck. Every run reads one JSON config, writes artifacts
// under the run directory and prints a metric summary.
int run_command(const std::vector<std::string>& args);

}  // namespace audiolab::cli
