#pragma once

#include <chrono>
#include <iostream>
#include <mutex>

#include "json.hpp"

namespace gridshield {

inline bool& log_enabled() {
    static bool enabled = true;
    return enabled;
}

// Line-delimited JSON events on stderr.
inline void log_event(const std::string& event, nlohmann::json fields = nlohmann::json::object()) {
    if (!log_enabled()) return;
    static std::mutex mtx;
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    fields["event"] = event;
    fields["ts_ms"] = now;
    std::lock_guard<std::mutex> lock(mtx);
    std::cerr << fields.dump() << "\n";
}

}  // namespace gridshield
