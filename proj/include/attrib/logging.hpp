#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

namespace attrib::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

Level threshold();
void set_threshold(Level lv);
void emit(Level lv, const std::string& msg);

inline void debug(const std::string& m) { emit(Level::debug, m); }
inline void info(const std::string& m) { emit(Level::info, m); }
inline void warn(const std::string& m) { emit(Level::warn, m); }
inline void error(const std::string& m) { emit(Level::error, m); }

// Scoped capture of warn/info messages; tests and drop-reports use this to
// assert that a fallback or drop was actually logged.
class Capture {
public:
    Capture();
    ~Capture();
    std::vector<std::string> messages() const;
    bool contains(const std::string& needle) const;

private:
    std::vector<std::string> captured_;
    friend void emit(Level, const std::string&);
};

}  // namespace attrib::log
