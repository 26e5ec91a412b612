#pragma once

#include "vulnllm/knowledge.hpp"
#include "vulnllm/llm_gateway.hpp"
#include "vulnllm/vector_index.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace vulnllm::config {

/// Chat settings for one backend section.
struct ChatSettings {
    llm::BackendSpec backend;
    double temperature = 0.0;
    int max_tokens = 1024;
};

/// Settings shared by the CLI commands. Every field has the default a bare
/// command line would use; a config file only overrides what it names.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    std::size_t jobs = 4;

    knowledge::ChunkingConfig chunking;
    std::size_t k = 20;
    std::size_t context_budget = 5;
    bool blank_cwe = false;

    index::EmbedderSpec embedder;
    ChatSettings chat;                                  ///< [backend]
    std::map<std::string, ChatSettings> chat_overrides;  ///< [backend.<strategy>]

    /// Backend settings for `strategy`, falling back to [backend].
    [[nodiscard]] const ChatSettings& chat_for(const std::string& strategy) const;
};

/// Parses an INI file:
///
///   [run]        seed, output_dir, jobs
///   [chunking]   chunk_size, chunk_overlap
///   [retrieval]  k, context_budget
///   [prompt]     blank_cwe
///   [embedder]   kind (deterministic|remote), dim, endpoint, model, auth_env,
///                batch_size, max_in_flight, max_attempts, base_delay_ms, timeout_ms
///   [backend]    kind (mock|remote), endpoint, model, auth_env, mock_script,
///                max_attempts, base_delay_ms, timeout_ms, temperature, max_tokens
///   [backend.sft] (or any strategy name) same keys, overriding [backend]
///
/// Secrets never appear in the file: auth_env names the environment variable
/// that holds the token. Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {});

}  // namespace vulnllm::config
