#include "ragchat/retry.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace ragchat {

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
    const double scaled = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1);
    const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, capped)));
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace ragchat
