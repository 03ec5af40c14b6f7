#pragma once

#include <string>

#include "icm/run_config.hpp"

namespace icm::cli {

// Command entry points.  Each validates its key set strictly, performs the
// work, writes outputs atomically under the configured directory, and
// returns the process exit code (0 success; study returns 2 when any
// replicate failed).  Configuration or input errors are thrown and mapped
// to exit codes by the caller.
int cmd_simulate(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_assoc(const RunConfig& config);
int cmd_study(const RunConfig& config);
int cmd_gradcheck(const RunConfig& config);

// Dispatch by command name ("simulate", "fit", "assoc", "study",
// "gradcheck"); unknown names raise ConfigError.
int run_command(const std::string& name, const RunConfig& config);

}  // namespace icm::cli
