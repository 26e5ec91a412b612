#include "vulnllm/retry.hpp"

#include "vulnllm/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace vulnllm {

std::chrono::milliseconds RetryPolicy::delay_for(int attempt, double unit_random) const {
    const double exp = std::ldexp(static_cast<double>(base_delay.count()), std::max(0, attempt - 1));
    const double capped = std::min(exp, static_cast<double>(max_delay.count()));
    const double j = std::clamp(jitter, 0.0, 1.0);
    const double scaled = capped * (1.0 - j * std::clamp(unit_random, 0.0, 1.0));
    return std::chrono::milliseconds(static_cast<long long>(std::llround(scaled)));
}

std::string call_with_retry(const RetryPolicy& policy, const std::function<std::string()>& call,
                            int& attempts) {
    if (policy.max_attempts < 1) throw UsageError("retry max_attempts must be >= 1");
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    attempts = 0;
    std::string last_error;
    bool last_was_timeout = false;
    while (attempts < policy.max_attempts) {
        ++attempts;
        try {
            return call();
        } catch (const TransientFailure& e) {
            last_error = e.what();
            last_was_timeout = e.is_timeout();
        }
        if (attempts == policy.max_attempts) break;
        const auto delay = policy.delay_for(attempts, unit(rng));
        if (policy.sleeper) {
            policy.sleeper(delay);
        } else if (delay.count() > 0) {
            std::this_thread::sleep_for(delay);
        }
    }
    if (last_was_timeout) throw Timeout(last_error, attempts);
    throw BackendUnavailable(last_error, attempts);
}

}  // namespace vulnllm
