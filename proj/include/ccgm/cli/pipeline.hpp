#pragma once

#include <filesystem>
#include <string>

#include "ccgm/cli/config.hpp"

namespace ccgm::cli {

// Executes one pipeline subcommand against a run directory. Commands:
//   make-data, train-baseline, fit-niqe, build-negatives, train-dualnda,
//   sample, eval, ablate, report
// `model_arg` selects the checkpoint for sample/eval: "baseline" | "dualnda".
// Throws ConfigError (usage / configuration) or other ccgm errors (runtime).
void run_command(const std::string& command, Config config,
                 const std::filesystem::path& run_dir, const std::string& model_arg);

// Exit-code policy: 0 ok, 2 configuration error, 3 runtime error.
int main_with_args(int argc, char** argv);

}  // namespace ccgm::cli
