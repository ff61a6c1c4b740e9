#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace ragchat {

/// Milliseconds since the Unix epoch. Swappable so that traces and sessions are
/// reproducible under test.
using Clock = std::function<std::int64_t()>;

Clock system_clock();

/// Clock that only moves when told to.
class ManualClock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    std::int64_t now() const { return now_.load(); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }
    void set(std::int64_t ms) { now_.store(ms); }

    Clock as_clock() {
        return [this] { return now_.load(); };
    }

private:
    std::atomic<std::int64_t> now_;
};

/// ISO-8601 UTC, second resolution ("2024-01-31T12:00:00Z").
std::string format_timestamp(std::int64_t epoch_ms);

}  // namespace ragchat
