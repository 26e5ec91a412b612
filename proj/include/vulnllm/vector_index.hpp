#pragma once

#include "vulnllm/knowledge.hpp"
#include "vulnllm/retry.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulnllm::index {

using Vector = std::vector<double>;

enum class EmbedderKind { remote, deterministic };

struct EmbedderSpec {
    EmbedderKind kind = EmbedderKind::deterministic;
    std::size_t dim = 256;
    std::string endpoint;  ///< full embeddings URL (remote)
    std::string model;
    std::string auth_env;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{60'000};
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
    /// Identifies the embedding space; stored in index headers.
    [[nodiscard]] virtual std::string fingerprint() const = 0;
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const = 0;

    /// Throws EmptyText when `text` has no tokens after cleaning.
    [[nodiscard]] Vector embed(std::string_view text) const;
};

/// Hashed bag of lower-cased tokens: each token adds +-1 to bucket
/// fnv1a64(token) % dim (sign from bit 32 of the hash), then the vector is
/// L2-normalised. Needs no model and is reproducible bit for bit.
class DeterministicEmbedder final : public Embedder {
public:
    explicit DeterministicEmbedder(std::size_t dim);
    [[nodiscard]] std::size_t dim() const noexcept override { return dim_; }
    [[nodiscard]] std::string fingerprint() const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

private:
    std::size_t dim_;
};

/// OpenAI-compatible embeddings client: POST {"input":[...],"model":m} and
/// read data[i].embedding. Batches run with at most spec.max_in_flight
/// concurrent requests; each batch is retried as a unit.
class RemoteEmbedder final : public Embedder {
public:
    explicit RemoteEmbedder(EmbedderSpec spec);
    [[nodiscard]] std::size_t dim() const noexcept override { return spec_.dim; }
    [[nodiscard]] std::string fingerprint() const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

private:
    std::vector<Vector> request(std::span<const std::string> texts) const;
    EmbedderSpec spec_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

/// Convenience wrapper over make_embedder(spec)->embed(text).
Vector embed(std::string_view text, const EmbedderSpec& spec);

struct EmbeddedChunk {
    knowledge::KnowledgeChunk chunk;
    Vector vector;
    [[nodiscard]] std::size_t dim() const noexcept { return vector.size(); }
};

/// "<doc_id>#<ordinal>"
std::string chunk_id(const knowledge::KnowledgeChunk& chunk);

struct RetrievalHit {
    knowledge::KnowledgeChunk chunk;
    double score = 0.0;
    [[nodiscard]] std::string id() const { return chunk_id(chunk); }
};

/// Ranking used everywhere hits are ordered: score descending, then
/// (doc_id, ordinal) ascending.
bool hit_before(const RetrievalHit& a, const RetrievalHit& b) noexcept;

double cosine(std::span<const double> a, std::span<const double> b);

/// Exact in-memory index. Queries may run concurrently; upsert, remove and
/// save take an exclusive lock.
class VectorStore {
public:
    VectorStore(std::size_t dim, std::string embedder_fingerprint);
    VectorStore(const VectorStore& other);
    VectorStore& operator=(const VectorStore& other);

    /// Inserts or replaces by chunk_id. Vectors must have the store dimension,
    /// finite components and a non-zero norm.
    std::vector<std::string> upsert(std::span<const EmbeddedChunk> chunks);
    [[nodiscard]] std::optional<EmbeddedChunk> fetch(const std::string& id) const;
    std::size_t remove_doc(const std::string& doc_id);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] bool empty() const { return size() == 0; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::string& fingerprint() const noexcept { return fingerprint_; }

    /// Top-k by cosine similarity. Throws EmptyStore, UsageError for k == 0.
    [[nodiscard]] std::vector<RetrievalHit> query_vector(std::span<const double> query,
                                                         std::size_t k) const;

    /// Versioned JSON:
    ///   {"format":"vulnllm-index","version":1,"dim":D,"embedder":"...",
    ///    "entries":[{"id","doc_id","ordinal","token_start","token_end",
    ///                "text","vector":[...]}, ...]}
    /// Entries are ordered by id so output is byte-stable.
    [[nodiscard]] std::string to_json() const;
    static VectorStore from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static VectorStore load(const std::filesystem::path& path);

private:
    struct Entry {
        EmbeddedChunk item;
        double norm = 0.0;
    };

    std::size_t dim_;
    std::string fingerprint_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Entry> entries_;
};

/// Embeds `query_text` and returns the top-k hits (k defaults to 20).
std::vector<RetrievalHit> query(const VectorStore& store, const Embedder& embedder,
                                std::string_view query_text, std::size_t k = 20);

/// Walks hits in ranking order keeping at most `per_doc_cap` chunks per
/// document until `context_budget` hits are kept.
std::vector<RetrievalHit> rerank(std::span<const RetrievalHit> hits,
                                 std::size_t context_budget = 5, std::size_t per_doc_cap = 2);

/// Source of knowledge context for retrieval-augmented prompts.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievalHit> retrieve(std::string_view query_text,
                                               std::size_t k) const = 0;
};

class IndexRetriever final : public Retriever {
public:
    IndexRetriever(const VectorStore& store, const Embedder& embedder)
        : store_(store), embedder_(embedder) {}
    std::vector<RetrievalHit> retrieve(std::string_view query_text,
                                       std::size_t k) const override {
        return query(store_, embedder_, query_text, k);
    }

private:
    const VectorStore& store_;
    const Embedder& embedder_;
};

/// Embeds every chunk of `store` and upserts it into `index`. Returns the
/// number of vectors written.
std::size_t index_knowledge(const knowledge::KnowledgeStore& store, const Embedder& embedder,
                            VectorStore& index);

}  // namespace vulnllm::index
