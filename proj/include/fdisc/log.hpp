#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace fdisc::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

namespace detail {
inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::Warn};
    return level;
}
inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}
inline void emit(Level lvl, std::string_view tag, std::string_view msg) {
    if (lvl < threshold().load(std::memory_order_relaxed)) return;
    std::lock_guard<std::mutex> lock(sink_mutex());
    std::clog << "[fdisc:" << tag << "] " << msg << '\n';
}
} // namespace detail

inline void set_level(Level lvl) { detail::threshold().store(lvl); }
inline Level level() { return detail::threshold().load(); }

inline void info(std::string_view msg) { detail::emit(Level::Info, "info", msg); }
inline void warn(std::string_view msg) { detail::emit(Level::Warn, "warn", msg); }

} // namespace fdisc::log
