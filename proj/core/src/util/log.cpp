#include "emap/util/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace emap::log {
namespace {

std::atomic<Level> g_min{Level::info};
std::mutex g_mutex;

const char* name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
  }
  return "?";
}

}  // namespace

void emit(Level level, const std::string& event, const std::string& fields) {
  if (level < g_min.load()) return;
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "emap %s %s%s%s\n", name(level), event.c_str(), fields.empty() ? "" : " ", fields.c_str());
}

void set_min_level(Level min) { g_min.store(min); }

}  // namespace emap::log
