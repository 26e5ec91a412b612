#include "vulnllm/llm_gateway.hpp"

#include "vulnllm/error.hpp"
#include "vulnllm/hash.hpp"
#include "vulnllm/http.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vulnllm::llm {

namespace {

std::string full_prompt(const ChatRequest& req) { return req.system + "\n\n" + req.user; }

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

/// Skips whitespace, ASCII separators and UTF-8 en/em dashes after a label.
std::size_t skip_separators(std::string_view s, std::size_t pos) {
    static constexpr std::string_view ascii = " \t\r\n*:.-,;!_#>`\"'";
    while (pos < s.size()) {
        if (ascii.find(s[pos]) != std::string_view::npos) {
            ++pos;
        } else if (s.substr(pos, 3) == "\xE2\x80\x94" || s.substr(pos, 3) == "\xE2\x80\x93") {
            pos += 3;
        } else {
            break;
        }
    }
    return pos;
}

}  // namespace

std::string prompt_hash(const ChatRequest& req) { return sha256_hex(full_prompt(req)); }

std::string_view to_string(Label label) noexcept {
    switch (label) {
        case Label::vulnerable: return "Vulnerable";
        case Label::not_vulnerable: return "Not Vulnerable";
        case Label::unparseable: return "Unparseable";
    }
    return "Unparseable";
}

Label label_from_string(std::string_view text) {
    if (text == "Vulnerable") return Label::vulnerable;
    if (text == "Not Vulnerable") return Label::not_vulnerable;
    if (text == "Unparseable") return Label::unparseable;
    throw DataError("unknown verdict label '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view raw) {
    Verdict v;
    v.raw = std::string(raw);
    const auto lower = ascii_lower(raw);
    const auto pos = lower.find("vulnerable");
    if (pos == std::string::npos) {
        v.label = Label::unparseable;
        v.reasoning = std::string(trim(raw));
        return v;
    }
    std::size_t label_start = pos;
    if (pos >= 4 && lower.compare(pos - 4, 4, "not ") == 0) {
        v.label = Label::not_vulnerable;
        label_start = pos - 4;
    } else {
        v.label = Label::vulnerable;
    }

    const bool leading = std::none_of(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(label_start),
                                      [](unsigned char c) { return std::isalnum(c); });
    if (leading) {
        const auto rest = skip_separators(raw, pos + std::string_view("vulnerable").size());
        v.reasoning = std::string(trim(raw.substr(rest)));
    } else {
        v.reasoning = std::string(trim(raw));
    }
    return v;
}

RemoteChatBackend::RemoteChatBackend(BackendSpec spec) : spec_(std::move(spec)) {
    http::parse_url(spec_.endpoint);
}

std::string RemoteChatBackend::send(const ChatRequest& req) {
    const auto token = http::bearer_token(spec_.auth_env);
    nlohmann::json messages = nlohmann::json::array();
    if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    const nlohmann::json body = {
        {"model", req.model.empty() ? spec_.model : req.model},
        {"messages", std::move(messages)},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };
    const auto resp = http::post_json(spec_.endpoint, body, token, spec_.timeout);
    try {
        return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw BackendError(spec_.endpoint + ": response lacks choices[0].message.content");
    }
}

std::shared_ptr<MockBackend> MockBackend::from_json(std::string_view script) {
    auto mock = std::make_shared<MockBackend>();
    try {
        const auto root = nlohmann::json::parse(script);
        if (root.contains("default") && !root["default"].is_null()) {
            mock->set_default(root["default"].get<std::string>());
        }
        if (root.contains("responses")) {
            for (const auto& [hash, text] : root["responses"].items()) {
                mock->add_response(hash, text.get<std::string>());
            }
        }
        if (root.contains("rules")) {
            for (const auto& r : root["rules"]) {
                mock->add_rule({r.at("contains").get<std::vector<std::string>>(),
                                r.at("response").get<std::string>()});
            }
        }
        if (root.contains("fail_first")) {
            for (const auto& [hash, n] : root["fail_first"].items()) {
                mock->fail_first(hash, n.get<int>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed mock script: ") + e.what());
    }
    return mock;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mock script '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void MockBackend::add_response(std::string hash, std::string response) {
    responses_[std::move(hash)] = std::move(response);
}

void MockBackend::add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

void MockBackend::set_default(std::string response) { default_ = std::move(response); }

void MockBackend::fail_first(std::string hash, int n) {
    std::scoped_lock lock(fail_mutex_);
    fail_by_hash_[std::move(hash)] = n;
}

void MockBackend::fail_all_first(int n) {
    std::scoped_lock lock(fail_mutex_);
    fail_all_ = n;
}

std::string MockBackend::send(const ChatRequest& req) {
    ++calls_;
    const auto prompt = full_prompt(req);
    const auto hash = sha256_hex(prompt);
    {
        std::scoped_lock lock(fail_mutex_);
        if (fail_all_ > 0) {
            --fail_all_;
            throw TransientFailure("mock: scripted failure");
        }
        if (auto it = fail_by_hash_.find(hash); it != fail_by_hash_.end() && it->second > 0) {
            --it->second;
            throw TransientFailure("mock: scripted failure for " + hash);
        }
    }
    if (auto it = responses_.find(hash); it != responses_.end()) return it->second;
    for (const auto& rule : rules_) {
        const bool hit = std::all_of(rule.contains.begin(), rule.contains.end(),
                                     [&](const std::string& s) {
                                         return prompt.find(s) != std::string::npos;
                                     });
        if (hit) return rule.response;
    }
    if (default_) return *default_;
    throw BackendError("mock: no scripted response for prompt " + hash);
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == BackendKind::remote) return std::make_shared<RemoteChatBackend>(spec);
    if (spec.mock_script.empty()) return std::make_shared<MockBackend>();
    return MockBackend::from_file(spec.mock_script);
}

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry,
                       std::size_t max_in_flight)
    : backend_(std::move(backend)),
      retry_(std::move(retry)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {
    if (!backend_) throw UsageError("gateway requires a backend");
}

Completion LlmGateway::complete(const ChatRequest& req) {
    if (req.user.empty()) throw UsageError("chat request user message must not be empty");
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& sem;
        ~Release() { sem.release(); }
    } release{in_flight_};

    Completion c;
    c.prompt_hash = prompt_hash(req);
    c.text = call_with_retry(retry_, [&] { return backend_->send(req); }, c.attempts);
    return c;
}

}  // namespace vulnllm::llm
