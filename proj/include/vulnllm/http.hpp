#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace vulnllm::http {

struct Url {
    std::string scheme_host_port;  ///< e.g. "http://localhost:8080"
    std::string path;              ///< e.g. "/v1/chat/completions"
};

/// Splits "scheme://host[:port]/path". Throws UsageError on anything else.
Url parse_url(const std::string& url);

/// Resolves the bearer token from the named environment variable. An empty
/// name means no auth; an unset or empty variable raises AuthMissing.
std::string bearer_token(const std::string& env_name);

/// One POST of a JSON body. Connection failures, timeouts and 429/5xx raise
/// TransientFailure; other non-2xx statuses and non-JSON bodies raise
/// BackendError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& bearer, std::chrono::milliseconds timeout);

}  // namespace vulnllm::http
