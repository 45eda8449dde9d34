#pragma once

#include <string>

#include "settings.hpp"

namespace tarif::cli {

/// Defaults (flat dotted keys) for a subcommand.
json command_defaults(const std::string& command);

// Each returns the process exit code: 0 ok, 1 verification failure.
int cmd_generate(const Settings& s);
int cmd_train(const Settings& s);
int cmd_diagnose(const Settings& s);
int cmd_verify_theorems(const Settings& s);
int cmd_bench_scaling(const Settings& s);

int run(int argc, char** argv);

}  // namespace tarif::cli
