#include "vulnllm/config.hpp"
#include "vulnllm/error.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace vulnllm;

TEST_CASE("defaults without a file") {
    const config::RunConfig cfg;
    CHECK(cfg.chunking.chunk_size == 512);
    CHECK(cfg.chunking.chunk_overlap == 32);
    CHECK(cfg.k == 20);
    CHECK(cfg.context_budget == 5);
    CHECK(cfg.chat.temperature == 0.0);
    CHECK(cfg.embedder.kind == index::EmbedderKind::deterministic);
}

TEST_CASE("full config with a per-strategy override") {
    const auto cfg = config::parse_run_config(R"(
[run]
seed = 7
jobs = 2

[chunking]
chunk_size = 256
chunk_overlap = 16

[retrieval]
k = 10
context_budget = 3

[prompt]
blank_cwe = true

[embedder]
kind = remote
dim = 768
endpoint = http://localhost:9000/v1/embeddings
model = nomic-embed
auth_env = EMBED_TOKEN

[backend]
kind = remote
endpoint = http://localhost:8000/v1/chat/completions
model = llama-3.2-3b-instruct
auth_env = LLM_TOKEN
max_attempts = 5
temperature = 0.0

[backend.sft]
model = llama-3.2-3b-vuln-sft
)", "/etc/vulnllm");
    CHECK(cfg.seed == 7);
    CHECK(cfg.jobs == 2);
    CHECK(cfg.chunking.chunk_size == 256);
    CHECK(cfg.k == 10);
    CHECK(cfg.blank_cwe);
    CHECK(cfg.embedder.dim == 768);
    CHECK(cfg.embedder.auth_env == "EMBED_TOKEN");
    CHECK(cfg.chat.backend.retry.max_attempts == 5);
    CHECK(cfg.chat_for("base").backend.model == "llama-3.2-3b-instruct");
    CHECK(cfg.chat_for("sft").backend.model == "llama-3.2-3b-vuln-sft");
    CHECK(cfg.chat_for("sft").backend.endpoint == cfg.chat.backend.endpoint);
}

TEST_CASE("relative mock script paths resolve against the config directory") {
    testing::TempDir dir;
    testing::write_file(dir / "run.ini", "[backend]\nkind = mock\nmock_script = scripts/mock.json\n");
    const auto cfg = config::load_run_config(dir / "run.ini");
    CHECK(cfg.chat.backend.mock_script == (dir.path() / "scripts/mock.json").string());
}

TEST_CASE("invalid configs are usage errors") {
    CHECK_THROWS_AS(config::parse_run_config("[nope]\nx = 1\n"), UsageError);
    CHECK_THROWS_AS(config::parse_run_config("[run]\nsede = 1\n"), UsageError);
    CHECK_THROWS_AS(config::parse_run_config("[run]\nseed = abc\n"), UsageError);
    CHECK_THROWS_AS(config::parse_run_config("[chunking]\nchunk_size = 32\nchunk_overlap = 32\n"), UsageError);
    CHECK_THROWS_AS(config::parse_run_config("[backend]\nkind = cloud\n"), UsageError);
    CHECK_THROWS_AS(config::parse_run_config("[prompt]\nblank_cwe = maybe\n"), UsageError);
    CHECK_THROWS_AS(config::load_run_config("/nonexistent/run.ini"), UsageError);
}
