#pragma once

#include <functional>
#include <string>

namespace emap::log {

enum class Level { debug, info, warn, error };

/// Progress lines go to stderr as "emap <level> <event> key=value ...".
void emit(Level level, const std::string& event, const std::string& fields = "");

inline void info(const std::string& event, const std::string& fields = "") { emit(Level::info, event, fields); }
inline void warn(const std::string& event, const std::string& fields = "") { emit(Level::warn, event, fields); }

/// Suppress levels below `min` (tests silence info output this way).
void set_min_level(Level min);

}  // namespace emap::log
