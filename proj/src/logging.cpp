#include "attrib/logging.hpp"

#include <algorithm>

namespace attrib::log {

namespace {
std::mutex g_mutex;
Level g_threshold = Level::info;
std::vector<Capture*> g_captures;

const char* label(Level lv) {
    switch (lv) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}
}  // namespace

Level threshold() { return g_threshold; }
void set_threshold(Level lv) { g_threshold = lv; }

void emit(Level lv, const std::string& msg) {
    std::lock_guard<std::mutex> lock(g_mutex);
    for (Capture* c : g_captures) c->captured_.push_back(msg);
    if (static_cast<int>(lv) >= static_cast<int>(g_threshold)) {
        std::cerr << "[" << label(lv) << "] " << msg << "\n";
    }
}

Capture::Capture() {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_captures.push_back(this);
}

Capture::~Capture() {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_captures.erase(std::remove(g_captures.begin(), g_captures.end(), this),
                     g_captures.end());
}

std::vector<std::string> Capture::messages() const {
    std::lock_guard<std::mutex> lock(g_mutex);
    return captured_;
}

bool Capture::contains(const std::string& needle) const {
    std::lock_guard<std::mutex> lock(g_mutex);
    for (const auto& m : captured_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace attrib::log
