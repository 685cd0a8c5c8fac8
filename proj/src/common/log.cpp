#include "common/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ieqa::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

const char* tag(Level level) {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    default: return "";
  }
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "[ieqa " << tag(lvl) << "] " << message << '\n';
}

}  // namespace ieqa::log
