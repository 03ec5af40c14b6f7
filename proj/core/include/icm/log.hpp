#pragma once

#include <string>

namespace icm {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Process-wide threshold, read once from the ICM_LOG environment variable
// ("error", "info", "debug"; default info).
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace icm
