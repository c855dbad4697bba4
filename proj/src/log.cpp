#include "stereoforge/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace stereoforge::log {

namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;

const char* tag(Level l) {
    switch (l) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        default: return "";
    }
}
} // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level l, const std::string& message) {
    if (static_cast<int>(l) < static_cast<int>(g_level.load())) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::fprintf(stderr, "[stereoforge %s] %s\n", tag(l), message.c_str());
}

} // namespace stereoforge::log
