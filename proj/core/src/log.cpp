#include "icm/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace icm {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ICM_LOG");
    if (!env) return LogLevel::kInfo;
    if (std::strcmp(env, "error") == 0) return LogLevel::kError;
    if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_error(const std::string& msg) {
  std::fprintf(stderr, "[icm:error] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::fprintf(stderr, "[icm] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug)
    std::fprintf(stderr, "[icm:debug] %s\n", msg.c_str());
}

}  // namespace icm
