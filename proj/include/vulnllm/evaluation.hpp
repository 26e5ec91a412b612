#pragma once

#include "vulnllm/llm_gateway.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulnllm::eval {

/// Positive class is Vulnerable.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    /// Unparseable predictions; already included in fp/fn.
    std::size_t unparseable = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + fn + tn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Unparseable predictions count against the predictor: fn when the truth
/// is 1, fp when it is 0. Throws LengthMismatch, or DataError for a truth
/// outside {0, 1}.
ConfusionMatrix confusion(std::span<const llm::Label> predictions, std::span<const int> truths);
ConfusionMatrix confusion(std::span<const llm::Verdict> predictions, std::span<const int> truths);

inline constexpr std::string_view kAverageRowName = "All (Avg)";

struct MetricRow {
    std::string name;  ///< CWE id or "All (Avg)"
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Set when the metric's denominator was zero and 0 was substituted.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

/// Throws EmptyMatrix when the matrix has no samples.
MetricRow metrics(const ConfusionMatrix& cm, std::string name = {});

/// Unweighted mean of each metric over `rows`. Throws EmptyRows.
MetricRow macro_average(std::span<const MetricRow> rows);

/// Round half up to two decimals, as printed in the result tables.
double round2(double value);
std::string format2(double value);

struct PairedTTestResult {
    double t = 0.0;
    std::size_t df = 0;
    double p = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double mean_diff = 0.0;
    double sd_diff = 0.0;
    double confidence = 0.95;
};

/// Paired two-sided t-test on d = a - b with a `confidence` interval for
/// mean(d). Throws LengthMismatch, DataError for n < 2, and
/// DegenerateDifferences when every difference is the same.
PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                                double confidence = 0.95);

/// Compares the mean of printed per-CWE values with a printed average.
struct AverageCheck {
    double computed = 0.0;   ///< mean of the printed inputs
    double printed = 0.0;
    bool consistent = false;  ///< round2(computed) == printed
};
AverageCheck check_printed_average(std::span<const double> printed_values, double printed_avg);

/// Per-CWE results of one strategy.
struct StrategyResult {
    std::string strategy;  ///< base, rag, sft, dual or any other name
    std::map<std::string, ConfusionMatrix> per_cwe;
};

struct ReportInputs {
    std::vector<StrategyResult> results;
    std::vector<std::string> cwes;  ///< row order of every table
    std::string baseline = "base";
    std::string run_id;
    std::string config_hash;
    std::uint64_t seed = 0;
};

struct ReportArtifacts {
    std::string markdown;
    std::string csv;
    std::string chart_json;  ///< strategy x CWE -> F1
};

/// Human-facing name: base -> Base, rag -> RAG, sft -> SFT, dual -> Dual-Agent LLM.
std::string display_name(std::string_view strategy);

/// One table per strategy (CWE rows + All (Avg)); with two or more
/// strategies, paired t-tests on per-CWE F1 against the baseline. Throws
/// NoResults when `results` is empty.
ReportArtifacts emit_report(const ReportInputs& inputs);

}  // namespace vulnllm::eval
