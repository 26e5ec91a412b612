#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace vulnllm::knowledge {

struct KnowledgeDoc {
    std::string doc_id;
    std::vector<std::string> pages;
};

struct KnowledgeChunk {
    std::string doc_id;
    std::size_t ordinal = 0;
    std::size_t token_start = 0;
    std::size_t token_end = 0;
    std::string text;

    [[nodiscard]] std::size_t size() const noexcept { return token_end - token_start; }
    friend bool operator==(const KnowledgeChunk&, const KnowledgeChunk&) = default;
};

struct ChunkingConfig {
    std::size_t chunk_size = 512;
    std::size_t chunk_overlap = 32;

    /// Throws UsageError unless 0 <= chunk_overlap < chunk_size.
    void validate() const;
    [[nodiscard]] std::size_t stride() const noexcept { return chunk_size - chunk_overlap; }
};

/// Removes non-printing control characters (C0 except tab/CR/LF, DEL, and
/// UTF-8 encoded C1), then collapses whitespace runs to one space and trims.
std::string clean_text(std::string_view raw);

/// Splits into identifier/number runs and single punctuation characters,
/// keeping the two-character operators -> == != <= >= && || :: << >> whole.
/// Bytes >= 0x80 count as identifier characters so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view text);

/// Sliding window over `tokens`: windows start every cfg.stride() tokens and
/// the last window ends exactly at tokens.size(). Neighbouring windows share
/// exactly cfg.chunk_overlap tokens. Chunk text is the tokens joined by spaces.
std::vector<KnowledgeChunk> chunk(const std::vector<std::string>& tokens,
                                  const ChunkingConfig& cfg, std::string_view doc_id = {});

/// clean -> tokenize -> chunk over the pages joined with single spaces.
std::vector<KnowledgeChunk> chunk_document(const KnowledgeDoc& doc, const ChunkingConfig& cfg);

/// Chunks keyed by document id. Reads may run concurrently; mutations take an
/// exclusive lock.
class KnowledgeStore {
public:
    KnowledgeStore() = default;
    KnowledgeStore(const KnowledgeStore& other);
    KnowledgeStore& operator=(const KnowledgeStore& other);

    /// Returns the number of chunks produced. Throws DuplicateDoc when the id
    /// is already present and `overwrite` is false.
    std::size_t ingest_document(const KnowledgeDoc& doc, const ChunkingConfig& cfg,
                                bool overwrite = false);

    bool remove(const std::string& doc_id);
    void reset();

    [[nodiscard]] bool contains(const std::string& doc_id) const;
    [[nodiscard]] std::vector<KnowledgeChunk> chunks(const std::string& doc_id) const;
    [[nodiscard]] std::vector<KnowledgeChunk> all_chunks() const;
    [[nodiscard]] std::vector<std::string> doc_ids() const;
    [[nodiscard]] std::size_t doc_count() const;
    [[nodiscard]] std::size_t chunk_count() const;

    /// {"format":"vulnllm-knowledge","version":1,"docs":{id:[{ordinal,...}]}}
    [[nodiscard]] std::string to_json() const;
    static KnowledgeStore from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static KnowledgeStore load(const std::filesystem::path& path);

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::vector<KnowledgeChunk>> docs_;
};

/// Reads every regular, non-hidden file in `dir` (sorted by name). The file
/// stem is the doc id; form feeds separate pages. Two files sharing a stem
/// raise DuplicateDoc.
std::vector<KnowledgeDoc> load_directory(const std::filesystem::path& dir);

}  // namespace vulnllm::knowledge
