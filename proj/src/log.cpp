#include "pkgintel/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace pkgintel::log {

namespace {

std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;
Sink g_sink;

const char* label(Level l) {
    switch (l) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
        case Level::Off: return "off";
    }
    return "?";
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(lvl, message);
        return;
    }
    std::cerr << "[pkgintel " << label(lvl) << "] " << message << '\n';
}

}  // namespace pkgintel::log
