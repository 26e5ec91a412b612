#pragma once

#include "vulnllm/retry.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace vulnllm::llm {

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string model;
};

/// SHA-256 of system + "\n\n" + user. Mock backends key their responses on it.
std::string prompt_hash(const ChatRequest& req);

enum class Label { vulnerable, not_vulnerable, unparseable };

std::string_view to_string(Label label) noexcept;
/// Inverse of to_string; throws DataError for anything else.
Label label_from_string(std::string_view text);

struct Verdict {
    Label label = Label::unparseable;
    std::string reasoning;
    std::string raw;
    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Case-insensitive scan for the first label phrase. "not vulnerable" wins
/// when it starts the earliest occurrence of "vulnerable"; any other
/// occurrence means Vulnerable; no occurrence is Unparseable. Never throws.
Verdict parse_verdict(std::string_view raw);

enum class BackendKind { remote, mock };

struct BackendSpec {
    BackendKind kind = BackendKind::mock;
    std::string endpoint;  ///< full chat-completions URL (remote)
    std::string model;
    std::string auth_env;  ///< name of the variable holding the token, never the token
    RetryPolicy retry;
    std::chrono::milliseconds timeout{120'000};
    std::string mock_script;  ///< path to a mock script (mock)
};

/// A single, non-retrying exchange with a model.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Throws TransientFailure for retryable problems.
    virtual std::string send(const ChatRequest& req) = 0;
};

/// OpenAI-compatible /chat/completions client.
class RemoteChatBackend final : public ChatBackend {
public:
    explicit RemoteChatBackend(BackendSpec spec);
    std::string send(const ChatRequest& req) override;

private:
    BackendSpec spec_;
};

/// Scripted backend for offline runs. Lookup order: exact prompt hash, then
/// the first rule whose substrings all occur in the prompt, then the default.
class MockBackend final : public ChatBackend {
public:
    struct Rule {
        std::vector<std::string> contains;
        std::string response;
    };

    MockBackend() = default;

    /// Script layout:
    ///   {"default": "...",
    ///    "responses": {"<prompt sha256>": "..."},
    ///    "rules": [{"contains": ["..."], "response": "..."}],
    ///    "fail_first": {"<prompt sha256>": 2}}
    static std::shared_ptr<MockBackend> from_json(std::string_view script);
    static std::shared_ptr<MockBackend> from_file(const std::string& path);

    void add_response(std::string hash, std::string response);
    void add_rule(Rule rule);
    void set_default(std::string response);
    /// The next `n` sends for this hash raise TransientFailure.
    void fail_first(std::string hash, int n);
    /// The next `n` sends (any prompt) raise TransientFailure.
    void fail_all_first(int n);

    std::string send(const ChatRequest& req) override;

    [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::map<std::string, std::string> responses_;
    std::vector<Rule> rules_;
    std::optional<std::string> default_;
    std::mutex fail_mutex_;
    std::map<std::string, int> fail_by_hash_;
    int fail_all_ = 0;
    std::atomic<std::size_t> calls_{0};
};

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec);

struct Completion {
    std::string text;
    std::string prompt_hash;
    int attempts = 0;
};

/// Retrying front door for a backend. Safe for concurrent use; at most
/// `max_in_flight` requests are outstanding at once.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry,
               std::size_t max_in_flight = 4);

    Completion complete(const ChatRequest& req);

    [[nodiscard]] const RetryPolicy& retry() const noexcept { return retry_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    std::counting_semaphore<1024> in_flight_;
};

}  // namespace vulnllm::llm
