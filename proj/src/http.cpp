#include "vulnllm/http.hpp"

#include "vulnllm/error.hpp"
#include "vulnllm/retry.hpp"

#include <httplib.h>

#include <cstdlib>
#include <regex>

namespace vulnllm::http {

Url parse_url(const std::string& url) {
    static const std::regex pattern(R"(^(https?://[^/\s]+)(/[^\s]*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) {
        throw UsageError("invalid endpoint URL '" + url + "' (expected http[s]://host[:port]/path)");
    }
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::string bearer_token(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* value = std::getenv(env_name.c_str());
    if (value == nullptr || *value == '\0') throw AuthMissing(env_name);
    return value;
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& bearer, std::chrono::milliseconds timeout) {
    const auto target = parse_url(url);
    httplib::Client client(target.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(target.path, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read &&
                                std::chrono::steady_clock::now() - started >= timeout);
        throw TransientFailure(url + ": " + httplib::to_string(err), timed_out);
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientFailure(url + ": HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError(url + ": HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 200));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw BackendError(url + ": response is not JSON");
    }
}

}  // namespace vulnllm::http
