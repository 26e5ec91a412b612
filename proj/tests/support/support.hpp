#pragma once

#include "vulnllm/corpus.hpp"
#include "vulnllm/llm_gateway.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vulnllm::testing {

/// Removed with its contents on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Directory holding tests/fixtures and tests/golden.
std::filesystem::path source_dir();

corpus::VulnRecord make_record(std::string cwe, std::string commit, int vul,
                               std::string message = "fix bounds check");

/// The record rendered into tests/golden/classification_prompt.txt.
corpus::VulnRecord golden_record();

/// Marker embedded in a synthetic record's commit message; unique per record
/// and never a substring of another record's marker.
std::string marker_for(std::size_t index);

/// `per_cwe` records per CWE, half vulnerable, each carrying marker_for(i).
std::vector<corpus::VulnRecord> synthetic_corpus(const std::vector<std::string>& cwes,
                                                 std::size_t per_cwe, std::uint64_t seed);

/// A few plain-text CWE descriptions for ingest.
void write_knowledge_dir(const std::filesystem::path& dir, const std::vector<std::string>& cwes);

/// What the scripted model answers for one record under one strategy.
struct ScriptedAnswer {
    llm::Label detector = llm::Label::unparseable;
    llm::Label validator = llm::Label::unparseable;  ///< dual only
};

/// Seeded label assignment for every record and strategy.
std::map<std::string, std::map<std::string, ScriptedAnswer>> script_answers(
    const std::vector<corpus::VulnRecord>& records, const std::vector<std::string>& strategies,
    std::uint64_t seed);

/// Mock script (JSON) whose rules key on each record's marker.
std::string mock_script(const std::vector<corpus::VulnRecord>& records,
                        const std::map<std::string, ScriptedAnswer>& answers, bool dual);

std::string response_text(llm::Label label, const std::string& why);

}  // namespace vulnllm::testing
