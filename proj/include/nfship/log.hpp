#pragma once

#include <sstream>
#include <string>

namespace nfship::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity is read once from NF_LOG (error|warn|info|debug); default warn.
Level threshold();
void set_threshold(Level level);
void write(Level level, const std::string& message);

inline void warn(const std::string& message) { write(Level::kWarn, message); }
inline void info(const std::string& message) { write(Level::kInfo, message); }
inline void debug(const std::string& message) { write(Level::kDebug, message); }
inline void error(const std::string& message) { write(Level::kError, message); }

}  // namespace nfship::log
