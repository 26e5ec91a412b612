#pragma once

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>

namespace vulnllm {

/// Retry settings shared by the chat and embedding clients.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30'000};
    /// Fraction of each delay that is randomised away (0 = no jitter).
    double jitter = 0.5;
    /// Replaces std::this_thread::sleep_for; tests use it to record delays.
    std::function<void(std::chrono::milliseconds)> sleeper;

    /// Delay before attempt `attempt + 1`, where `attempt` is 1-based.
    [[nodiscard]] std::chrono::milliseconds delay_for(int attempt, double unit_random) const;
};

/// Thrown by transports for failures worth retrying (connection errors,
/// timeouts, HTTP 429/5xx). Anything else propagates immediately.
class TransientFailure : public std::runtime_error {
public:
    TransientFailure(const std::string& what, bool timeout = false)
        : std::runtime_error(what), timeout_(timeout) {}
    [[nodiscard]] bool is_timeout() const noexcept { return timeout_; }

private:
    bool timeout_;
};

/// Runs `call` until it succeeds or `policy.max_attempts` transient failures
/// have occurred, sleeping with jittered exponential backoff in between.
/// Exhaustion raises Timeout when the last failure was a timeout, otherwise
/// BackendUnavailable. `attempts` receives the number of calls made.
std::string call_with_retry(const RetryPolicy& policy, const std::function<std::string()>& call,
                            int& attempts);

}  // namespace vulnllm
