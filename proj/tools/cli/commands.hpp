#pragma once

#include <string>
#include <vector>

#include "cli/run_config.hpp"

namespace andikit::cli {

const std::vector<std::string>& command_names();

/// Runs one command. Outputs, the resolved configuration (config.resolved)
/// and input hashes (inputs.json) go to `out_dir`. Errors are thrown as
/// UsageError, ConfigError, MissingInput or any other exception (runtime).
void run_command(const std::string& command, RunConfig& config, const std::string& out_dir, unsigned workers);

/// Maps an exception from run_command to an exit code.
int exit_code_for(const std::exception& e);

}  // namespace andikit::cli
