#pragma once

#include <chrono>
#include <functional>

namespace ragchat {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};

    /// Delay before attempt `attempt + 1` (attempt is 1-based), capped at max_backoff.
    std::chrono::milliseconds backoff_after(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

Sleeper real_sleeper();

/// HTTP statuses worth retrying: 429 and 5xx.
constexpr bool is_retriable_status(int status) {
    return status == 429 || (status >= 500 && status <= 599);
}

}  // namespace ragchat
