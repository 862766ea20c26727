#pragma once

#include <iostream>
#include <string_view>

namespace latsplit {

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2 };

inline LogLevel& log_level() {
  static LogLevel level = LogLevel::kInfo;
  return level;
}

inline void log_info(std::string_view msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[latsplit] " << msg << '\n';
}

inline void log_warn(std::string_view msg) {
  if (log_level() >= LogLevel::kWarn) std::cerr << "[latsplit] warning: " << msg << '\n';
}

}  // namespace latsplit
