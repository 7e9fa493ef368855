#include "uem/log.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace uem::log {

namespace {

std::optional<Level>& override_level() {
  static std::optional<Level> lvl;
  return lvl;
}

Level from_env() {
  const char* env = std::getenv("UEM_LOG");
  if (env == nullptr) return Level::info;
  const std::string v(env);
  if (v == "error") return Level::error;
  if (v == "debug") return Level::debug;
  return Level::info;
}

void emit(Level at, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(at) > static_cast<int>(level())) return;
  std::cerr << "[uem " << tag << "] " << msg << '\n';
}

}  // namespace

Level level() {
  static const Level env_level = from_env();
  return override_level().value_or(env_level);
}

void set_level(Level lvl) { override_level() = lvl; }

void error(std::string_view msg) { emit(Level::error, "error", msg); }
void warn(std::string_view msg) { emit(Level::info, "warn", msg); }
void info(std::string_view msg) { emit(Level::info, "info", msg); }
void debug(std::string_view msg) { emit(Level::debug, "debug", msg); }

}  // namespace uem::log
