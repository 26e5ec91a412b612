#include "vulnllm/config.hpp"

#include "vulnllm/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace vulnllm::config {

namespace {

namespace pt = boost::property_tree;

template <typename T>
T get_or(const pt::ptree& section, const std::string& key, T fallback) {
    if (!section.get_child_optional(key)) return fallback;
    try {
        return section.get<T>(key);
    } catch (const pt::ptree_bad_data&) {
        throw UsageError("config key '" + key + "' has an invalid value");
    }
}

bool get_bool(const pt::ptree& section, const std::string& key, bool fallback) {
    const auto raw = section.get_optional<std::string>(key);
    if (!raw) return fallback;
    if (*raw == "true" || *raw == "1" || *raw == "yes") return true;
    if (*raw == "false" || *raw == "0" || *raw == "no") return false;
    throw UsageError("config key '" + key + "' must be true or false");
}

std::string resolve_path(const std::string& value, const std::filesystem::path& base_dir) {
    if (value.empty() || base_dir.empty()) return value;
    const std::filesystem::path p(value);
    return p.is_absolute() ? value : (base_dir / p).string();
}

void check_keys(const pt::ptree& section, const std::string& name,
                const std::set<std::string>& allowed) {
    for (const auto& [key, child] : section) {
        if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in [" + name + "]");
    }
}

void read_retry(const pt::ptree& s, RetryPolicy& retry) {
    retry.max_attempts = get_or(s, "max_attempts", retry.max_attempts);
    retry.base_delay = std::chrono::milliseconds(get_or<long long>(s, "base_delay_ms", retry.base_delay.count()));
    if (retry.max_attempts < 1) throw UsageError("max_attempts must be >= 1");
}

ChatSettings read_chat(const pt::ptree& s, const std::string& name, ChatSettings chat,
                       const std::filesystem::path& base_dir) {
    check_keys(s, name,
               {"kind", "endpoint", "model", "auth_env", "mock_script", "max_attempts",
                "base_delay_ms", "timeout_ms", "temperature", "max_tokens"});
    if (auto kind = s.get_optional<std::string>("kind")) {
        if (*kind == "mock") {
            chat.backend.kind = llm::BackendKind::mock;
        } else if (*kind == "remote") {
            chat.backend.kind = llm::BackendKind::remote;
        } else {
            throw UsageError("[" + name + "] kind must be mock or remote");
        }
    }
    chat.backend.endpoint = get_or(s, "endpoint", chat.backend.endpoint);
    chat.backend.model = get_or(s, "model", chat.backend.model);
    chat.backend.auth_env = get_or(s, "auth_env", chat.backend.auth_env);
    if (auto script = s.get_optional<std::string>("mock_script")) {
        chat.backend.mock_script = resolve_path(*script, base_dir);
    }
    read_retry(s, chat.backend.retry);
    chat.backend.timeout =
        std::chrono::milliseconds(get_or<long long>(s, "timeout_ms", chat.backend.timeout.count()));
    chat.temperature = get_or(s, "temperature", chat.temperature);
    chat.max_tokens = get_or(s, "max_tokens", chat.max_tokens);
    if (chat.temperature < 0.0) throw UsageError("temperature must be >= 0");
    return chat;
}

}  // namespace

const ChatSettings& RunConfig::chat_for(const std::string& strategy) const {
    const auto it = chat_overrides.find(strategy);
    return it == chat_overrides.end() ? chat : it->second;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw UsageError(std::string("invalid config: ") + e.what());
    }

    RunConfig cfg;
    for (const auto& [name, section] : tree) {
        if (name == "run") {
            check_keys(section, name, {"seed", "output_dir", "jobs"});
            cfg.seed = get_or(section, "seed", cfg.seed);
            if (auto dir = section.get_optional<std::string>("output_dir")) {
                cfg.output_dir = resolve_path(*dir, base_dir);
            }
            cfg.jobs = get_or(section, "jobs", cfg.jobs);
        } else if (name == "chunking") {
            check_keys(section, name, {"chunk_size", "chunk_overlap"});
            cfg.chunking.chunk_size = get_or(section, "chunk_size", cfg.chunking.chunk_size);
            cfg.chunking.chunk_overlap = get_or(section, "chunk_overlap", cfg.chunking.chunk_overlap);
            cfg.chunking.validate();
        } else if (name == "retrieval") {
            check_keys(section, name, {"k", "context_budget"});
            cfg.k = get_or(section, "k", cfg.k);
            cfg.context_budget = get_or(section, "context_budget", cfg.context_budget);
        } else if (name == "prompt") {
            check_keys(section, name, {"blank_cwe"});
            cfg.blank_cwe = get_bool(section, "blank_cwe", cfg.blank_cwe);
        } else if (name == "embedder") {
            check_keys(section, name,
                       {"kind", "dim", "endpoint", "model", "auth_env", "batch_size",
                        "max_in_flight", "max_attempts", "base_delay_ms", "timeout_ms"});
            auto& e = cfg.embedder;
            if (auto kind = section.get_optional<std::string>("kind")) {
                if (*kind == "deterministic") {
                    e.kind = index::EmbedderKind::deterministic;
                } else if (*kind == "remote") {
                    e.kind = index::EmbedderKind::remote;
                } else {
                    throw UsageError("[embedder] kind must be deterministic or remote");
                }
            }
            e.dim = get_or(section, "dim", e.dim);
            e.endpoint = get_or(section, "endpoint", e.endpoint);
            e.model = get_or(section, "model", e.model);
            e.auth_env = get_or(section, "auth_env", e.auth_env);
            e.batch_size = get_or(section, "batch_size", e.batch_size);
            e.max_in_flight = get_or(section, "max_in_flight", e.max_in_flight);
            read_retry(section, e.retry);
            e.timeout = std::chrono::milliseconds(get_or<long long>(section, "timeout_ms", e.timeout.count()));
        } else if (name == "backend") {
            cfg.chat = read_chat(section, name, cfg.chat, base_dir);
        } else if (name.starts_with("backend.")) {
            // Resolved after [backend] so overrides inherit from it.
        } else {
            throw UsageError("unknown config section [" + name + "]");
        }
    }
    for (const auto& [name, section] : tree) {
        if (!name.starts_with("backend.")) continue;
        const auto strategy = name.substr(std::string("backend.").size());
        cfg.chat_overrides[strategy] = read_chat(section, name, cfg.chat, base_dir);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.parent_path());
}

}  // namespace vulnllm::config
