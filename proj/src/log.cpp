#include "nfship/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string_view>

namespace nfship::log {
namespace {

Level parse_env() {
  const char* env = std::getenv("NF_LOG");
  if (env == nullptr) return Level::kWarn;
  std::string_view v(env);
  if (v == "error") return Level::kError;
  if (v == "info") return Level::kInfo;
  if (v == "debug") return Level::kDebug;
  return Level::kWarn;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(parse_env())};
  return slot;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load()); }

void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, const std::string& message) {
  if (static_cast<int>(level) > level_slot().load()) return;
  std::cerr << "[nfship:" << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace nfship::log
