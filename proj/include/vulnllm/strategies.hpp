#pragma once

#include "vulnllm/corpus.hpp"
#include "vulnllm/error.hpp"
#include "vulnllm/llm_gateway.hpp"
#include "vulnllm/vector_index.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vulnllm::strategies {

/// Bumped whenever a template file changes; recorded in run artifacts.
inline constexpr std::string_view kPromptVersion = "v1";

/// Single-pass "{{name}}" substitution. Inserted values are not re-scanned.
/// Throws std::invalid_argument for a placeholder missing from `values`.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values);

struct PromptBundle {
    std::string system;
    std::string user;
    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct PromptOptions {
    /// Renders the CWE ID field as "N/A" even when the record has one.
    bool blank_cwe = false;
};

/// The classification prompt. A non-empty `context` adds a delimited
/// "Relevant CWE knowledge" section right before the question.
PromptBundle render_classification_prompt(const corpus::VulnRecord& record,
                                          std::string_view context = {},
                                          const PromptOptions& options = {});

/// The validator prompt: the same evidence block, the detector's label and
/// reasoning (or its raw text when unparseable) and the audit directive.
PromptBundle render_validator_prompt(const corpus::VulnRecord& record,
                                     const llm::Verdict& detector,
                                     const PromptOptions& options = {});

inline constexpr std::size_t kRagCodePrefixTokens = 128;

/// cwe_id, commit message and the first 128 tokens of func_before joined by
/// single spaces; empty parts are skipped.
std::string build_rag_query(const corpus::VulnRecord& record);

/// Concatenates hit texts, each headed by "[<doc_id>#<ordinal>]".
std::string format_context(std::span<const index::RetrievalHit> hits);

struct DualVerdict {
    llm::Verdict detector;
    llm::Verdict validator;
    llm::Label final_label = llm::Label::unparseable;
    bool revised = false;
};

/// final = validator when parseable, else detector; revised = final differs
/// from the detector's label.
std::pair<llm::Label, bool> arbitrate(llm::Label detector, llm::Label validator) noexcept;

enum class StrategyKind { base, rag, sft, dual };

std::string_view to_string(StrategyKind kind) noexcept;
StrategyKind strategy_from_string(std::string_view name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::base;
    llm::LlmGateway* gateway = nullptr;
    /// Required for rag; never consulted by the other strategies.
    const index::Retriever* retriever = nullptr;
    std::size_t k = 20;
    std::size_t context_budget = 5;
    PromptOptions prompt;
    std::string model;
    double temperature = 0.0;
    int max_tokens = 1024;
};

/// One model exchange, as written to the run transcript.
struct CallRecord {
    std::string stage;  ///< "detector" or "validator"
    std::string prompt_hash;
    std::string system;
    std::string user;
    std::string response;
    int attempts = 0;
};

struct Detection {
    StrategyKind strategy = StrategyKind::base;
    llm::Verdict verdict;  ///< for dual: final label with the deciding agent's text
    std::optional<DualVerdict> dual;
    std::vector<std::string> retrieved_ids;  ///< top-k before re-ranking (rag)
    std::vector<std::string> context_ids;    ///< hits placed in the prompt (rag)
    std::vector<CallRecord> calls;
};

/// Raised when the validator stage of a dual run fails; carries the
/// detector half so callers can record it.
class StageFailure : public BackendError {
public:
    StageFailure(const std::string& what, Detection partial)
        : BackendError(what), partial_(std::move(partial)) {}
    [[nodiscard]] const Detection& partial() const noexcept { return partial_; }

private:
    Detection partial_;
};

/// Base and SFT: the classification prompt without context.
Detection detect_base(const corpus::VulnRecord& record, const StrategyConfig& cfg);
/// Retrieve, re-rank, then classify with the knowledge section filled in.
Detection detect_rag(const corpus::VulnRecord& record, const StrategyConfig& cfg);
/// Detector pass followed by one validator pass.
Detection detect_dual(const corpus::VulnRecord& record, const StrategyConfig& cfg);

/// Dispatches on cfg.kind.
Detection detect(const corpus::VulnRecord& record, const StrategyConfig& cfg);

}  // namespace vulnllm::strategies
