#pragma once

#include "vulnllm/config.hpp"
#include "vulnllm/corpus.hpp"
#include "vulnllm/evaluation.hpp"
#include "vulnllm/llm_gateway.hpp"
#include "vulnllm/strategies.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vulnllm::cli {

/// Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

struct IngestOptions {
    std::filesystem::path knowledge_dir;
    std::filesystem::path index_path;
    std::filesystem::path store_path;  ///< defaults to <index_path>.knowledge.json
    bool overwrite = false;
    config::RunConfig config;
};

struct IngestSummary {
    std::size_t docs = 0;
    std::size_t chunks = 0;
    std::size_t vectors = 0;
};

/// Ingests every file of the knowledge directory into the knowledge store and
/// the vector index (both created, or extended when they already exist).
IngestSummary cmd_ingest(const IngestOptions& opts);

struct PrepareOptions {
    std::filesystem::path corpus_path;
    std::vector<std::string> cwes;
    std::size_t train_total = 5000;
    std::size_t test_total = 1000;
    std::filesystem::path out_dir;
    std::optional<std::string> instruction;  ///< defaults to the classification directive
    config::RunConfig config;
};

struct PrepareSummary {
    corpus::CorpusSplit split;
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::filesystem::path sft_path;
    std::filesystem::path manifest_path;
};

/// Writes train.jsonl, test.jsonl, sft_train.jsonl and split_manifest.json.
PrepareSummary cmd_prepare(const PrepareOptions& opts);

struct DetectOptions {
    std::filesystem::path test_path;
    strategies::StrategyKind strategy = strategies::StrategyKind::base;
    std::filesystem::path out_path;         ///< verdicts JSONL (appended on resume)
    std::filesystem::path transcript_path;  ///< defaults to <out_path minus .jsonl>.transcript.jsonl
    std::optional<std::filesystem::path> index_path;
    std::optional<std::size_t> max_records;
    config::RunConfig config;
    /// Replaces the backend built from the config (tests, embedding callers).
    std::shared_ptr<llm::ChatBackend> backend;
};

struct DetectSummary {
    std::size_t total = 0;
    std::size_t already_done = 0;
    std::size_t processed = 0;
    std::size_t failed = 0;
    std::string run_id;
    std::string config_hash;
};

/// Runs one strategy over the test file, one verdict line per record. Records
/// already answered in `out_path` are skipped; backend failures are recorded
/// per record and the run continues.
DetectSummary cmd_detect(const DetectOptions& opts);

struct EvalOptions {
    std::vector<std::filesystem::path> verdict_paths;
    std::filesystem::path truth_path;
    std::filesystem::path out_dir;
    std::string baseline = "base";
    std::vector<std::string> cwes;  ///< row order; defaults to first appearance in the truth file
};

/// Writes report.md, report.csv and f1_chart.json into out_dir.
eval::ReportArtifacts cmd_eval(const EvalOptions& opts);

}  // namespace vulnllm::cli
