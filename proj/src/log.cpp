#include "plandistill/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace plandistill::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mu;

const char* tag(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        case Level::off: break;
    }
    return "";
}
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level l, std::string_view message) {
    if (l < g_level.load() || l == Level::off) return;
    std::lock_guard lock(g_mu);
    std::cerr << "[" << tag(l) << "] " << message << '\n';
}

}  // namespace plandistill::log
