#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vulnllm::corpus {

/// One labeled commit-level sample (Big-Vul column layout).
struct VulnRecord {
    std::string cwe_id;  ///< "CWE-<digits>", or empty when absent
    std::string code_link;
    std::string commit_id;
    std::string commit_message;
    std::string func_before;
    std::string func_after;
    std::string lang;
    std::string project;
    int vul = 0;
    std::optional<std::string> cve_id;  ///< optional "CVE ID" column

    /// Stable identity used to join records across files.
    [[nodiscard]] std::string record_id() const { return commit_id + "/" + cwe_id; }

    friend bool operator==(const VulnRecord&, const VulnRecord&) = default;
};

enum class Format { csv, jsonl };

/// Picks the format from a file extension (".csv" or ".jsonl"/".json").
Format format_from_path(std::string_view path);

/// Column names as they appear in Big-Vul exports, keyed by record field.
///   CWE ID -> cwe_id, codeLink -> code_link, commit_id, commit_message,
///   func_after, func_before, lang, project, vul, CVE ID -> cve_id (optional).
/// The snake_case field names are accepted as aliases on input.
inline constexpr std::string_view kRequiredColumns[] = {
    "CWE ID",    "codeLink", "commit_id", "commit_message", "func_after",
    "func_before", "lang",   "project",   "vul",
};

std::vector<VulnRecord> parse_records(std::istream& in, Format format);
std::vector<VulnRecord> parse_records(std::string_view text, Format format);
std::vector<VulnRecord> read_records(const std::string& path);

void write_records(std::ostream& out, const std::vector<VulnRecord>& records, Format format);
std::string serialize_records(const std::vector<VulnRecord>& records, Format format);

struct LabelCounts {
    std::size_t vulnerable = 0;
    std::size_t non_vulnerable = 0;
    friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

struct SplitCounts {
    LabelCounts train;
    LabelCounts test;
    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct CorpusSplit {
    std::vector<VulnRecord> train;
    std::vector<VulnRecord> test;
    std::map<std::string, SplitCounts> per_cwe_counts;
    std::size_t duplicates_dropped = 0;
};

struct DedupResult {
    std::vector<VulnRecord> records;
    std::size_t dropped = 0;
};

/// Keeps the first record per (commit_id, cwe_id); order is preserved.
DedupResult deduplicate(const std::vector<VulnRecord>& records);

/// Draws a balanced, seed-deterministic train/test split.
///
/// Each total is spread evenly over the CWEs and both labels, so it must be
/// divisible by 2 * cwes.size(). Test records are drawn first; train records
/// are drawn afterwards from commits not used by the test split, which keeps
/// the two splits disjoint by commit_id. Records whose CWE is not in `cwes`
/// are ignored.
CorpusSplit balance_split(const std::vector<VulnRecord>& records,
                          const std::set<std::string>& cwes, std::size_t train_total,
                          std::size_t test_total, std::uint64_t seed);

inline constexpr std::string_view kVulnerableLabel = "Vulnerable";
inline constexpr std::string_view kNotVulnerableLabel = "Not Vulnerable";

struct SftTriple {
    std::string instruction;
    std::string input;
    std::string output;
    friend bool operator==(const SftTriple&, const SftTriple&) = default;
};

/// Record fields in the order the classification prompt lists them.
std::string serialize_sft_input(const VulnRecord& record);

std::vector<SftTriple> export_sft(const std::vector<VulnRecord>& records,
                                  std::string_view instruction);

/// One JSON object per line with keys instruction, input, output.
void write_sft_jsonl(std::ostream& out, const std::vector<SftTriple>& triples);

}  // namespace vulnllm::corpus
