#pragma once

#include <atomic>
#include <chrono>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

namespace fitcap::log {

enum class Level { quiet = 0, info = 1, debug = 2 };

inline std::atomic<int>& threshold() {
    static std::atomic<int> level{static_cast<int>(Level::info)};
    return level;
}

inline void set_level(Level level) { threshold().store(static_cast<int>(level)); }

inline bool enabled(Level level) { return static_cast<int>(level) <= threshold().load(); }

inline double elapsed_seconds() {
    static const auto start = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::mutex& output_mutex() {
    static std::mutex mu;
    return mu;
}

template <class... Args>
void write(Level level, const Args&... args) {
    if (!enabled(level)) return;
    std::ostringstream os;
    os << '[' << std::fixed << std::setprecision(1) << std::setw(8) << elapsed_seconds() << "s] ";
    os << std::defaultfloat << std::setprecision(6);
    (os << ... << args);
    os << '\n';
    std::lock_guard lock(output_mutex());
    std::clog << os.str() << std::flush;
}

template <class... Args>
void info(const Args&... args) { write(Level::info, args...); }

template <class... Args>
void debug(const Args&... args) { write(Level::debug, args...); }

}  // namespace fitcap::log
