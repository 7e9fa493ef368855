#pragma once

#include <string_view>

namespace uem::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Active level, read once from UEM_LOG={error,info,debug}; defaults to info.
Level level();
void set_level(Level lvl);

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace uem::log
