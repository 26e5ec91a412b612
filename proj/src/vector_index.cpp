#include "vulnllm/vector_index.hpp"

#include "vulnllm/error.hpp"
#include "vulnllm/hash.hpp"
#include "vulnllm/http.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>

namespace vulnllm::index {

namespace {

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

Vector Embedder::embed(std::string_view text) const {
    if (knowledge::clean_text(text).empty()) throw EmptyText();
    const std::string owned(text);
    auto out = embed_batch(std::span<const std::string>(&owned, 1));
    return std::move(out.at(0));
}

DeterministicEmbedder::DeterministicEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw UsageError("embedding dimension must be > 0");
}

std::string DeterministicEmbedder::fingerprint() const {
    return "deterministic-fnv1a-v1/dim=" + std::to_string(dim_);
}

std::vector<Vector> DeterministicEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        const auto tokens = knowledge::tokenize(knowledge::clean_text(text));
        if (tokens.empty()) throw EmptyText();
        Vector v(dim_, 0.0);
        for (auto tok : tokens) {
            std::transform(tok.begin(), tok.end(), tok.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            const auto h = fnv1a64(tok);
            v[h % dim_] += ((h >> 32) & 1U) ? -1.0 : 1.0;
        }
        const double norm = l2_norm(v);
        if (norm == 0.0) throw DataError("hashed token counts cancelled to a zero vector");
        for (double& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec) : spec_(std::move(spec)) {
    if (spec_.dim == 0) throw UsageError("embedding dimension must be > 0");
    http::parse_url(spec_.endpoint);
}

std::string RemoteEmbedder::fingerprint() const {
    return "remote/" + spec_.model + "@" + spec_.endpoint + "/dim=" + std::to_string(spec_.dim);
}

std::vector<Vector> RemoteEmbedder::request(std::span<const std::string> texts) const {
    const auto token = http::bearer_token(spec_.auth_env);
    const nlohmann::json body = {
        {"input", std::vector<std::string>(texts.begin(), texts.end())},
        {"model", spec_.model},
    };
    std::vector<Vector> vectors;
    int attempts = 0;
    try {
        call_with_retry(
            spec_.retry,
            [&]() -> std::string {
                const auto resp = http::post_json(spec_.endpoint, body, token, spec_.timeout);
                std::vector<std::pair<std::size_t, Vector>> items;
                try {
                    const auto& data = resp.at("data");
                    for (std::size_t i = 0; i < data.size(); ++i) {
                        const auto& d = data[i];
                        items.emplace_back(d.value("index", i),
                                           d.at("embedding").get<Vector>());
                    }
                } catch (const nlohmann::json::exception&) {
                    throw BackendError(spec_.endpoint + ": response lacks data[].embedding");
                }
                std::sort(items.begin(), items.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                vectors.clear();
                for (auto& [i, v] : items) vectors.push_back(std::move(v));
                return {};
            },
            attempts);
    } catch (const BackendUnavailable& e) {
        throw EmbedderUnavailable(spec_.endpoint, e.what());
    } catch (const Timeout& e) {
        throw EmbedderUnavailable(spec_.endpoint, e.what());
    }
    if (vectors.size() != texts.size()) {
        throw BackendError(spec_.endpoint + ": expected " + std::to_string(texts.size()) +
                           " embeddings, got " + std::to_string(vectors.size()));
    }
    for (const auto& v : vectors) {
        if (v.size() != spec_.dim) throw DimMismatch(spec_.dim, v.size());
    }
    return vectors;
}

std::vector<Vector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    const std::size_t batch = std::max<std::size_t>(1, spec_.batch_size);
    const std::size_t lanes = std::max<std::size_t>(1, spec_.max_in_flight);
    std::vector<Vector> out(texts.size());

    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s < texts.size(); s += batch) starts.push_back(s);

    for (std::size_t wave = 0; wave < starts.size(); wave += lanes) {
        std::vector<std::pair<std::size_t, std::future<std::vector<Vector>>>> pending;
        for (std::size_t w = wave; w < std::min(starts.size(), wave + lanes); ++w) {
            const auto s = starts[w];
            const auto n = std::min(batch, texts.size() - s);
            pending.emplace_back(s, std::async(std::launch::async, [this, texts, s, n] {
                                     return request(texts.subspan(s, n));
                                 }));
        }
        for (auto& [s, fut] : pending) {
            auto vs = fut.get();
            std::move(vs.begin(), vs.end(), out.begin() + static_cast<std::ptrdiff_t>(s));
        }
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
    if (spec.kind == EmbedderKind::remote) return std::make_unique<RemoteEmbedder>(spec);
    return std::make_unique<DeterministicEmbedder>(spec.dim);
}

Vector embed(std::string_view text, const EmbedderSpec& spec) {
    return make_embedder(spec)->embed(text);
}

std::string chunk_id(const knowledge::KnowledgeChunk& chunk) {
    return chunk.doc_id + "#" + std::to_string(chunk.ordinal);
}

bool hit_before(const RetrievalHit& a, const RetrievalHit& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.chunk.doc_id != b.chunk.doc_id) return a.chunk.doc_id < b.chunk.doc_id;
    return a.chunk.ordinal < b.chunk.ordinal;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimMismatch(a.size(), b.size());
    const double denom = l2_norm(a) * l2_norm(b);
    if (denom == 0.0) throw DataError("cosine of a zero vector");
    return dot(a, b) / denom;
}

VectorStore::VectorStore(std::size_t dim, std::string embedder_fingerprint)
    : dim_(dim), fingerprint_(std::move(embedder_fingerprint)) {
    if (dim_ == 0) throw UsageError("vector store dimension must be > 0");
}

VectorStore::VectorStore(const VectorStore& other) : dim_(other.dim_), fingerprint_(other.fingerprint_) {
    std::shared_lock lock(other.mutex_);
    entries_ = other.entries_;
}

VectorStore& VectorStore::operator=(const VectorStore& other) {
    if (this != &other) {
        std::scoped_lock lock(mutex_);
        std::shared_lock other_lock(other.mutex_);
        dim_ = other.dim_;
        fingerprint_ = other.fingerprint_;
        entries_ = other.entries_;
    }
    return *this;
}

std::vector<std::string> VectorStore::upsert(std::span<const EmbeddedChunk> chunks) {
    std::vector<Entry> prepared;
    prepared.reserve(chunks.size());
    for (const auto& c : chunks) {
        if (c.vector.size() != dim_) throw DimMismatch(dim_, c.vector.size());
        if (!std::all_of(c.vector.begin(), c.vector.end(), [](double x) { return std::isfinite(x); })) {
            throw DataError("embedding for " + chunk_id(c.chunk) + " has non-finite components");
        }
        const double norm = l2_norm(c.vector);
        if (norm == 0.0) throw DataError("embedding for " + chunk_id(c.chunk) + " has zero norm");
        prepared.push_back({c, norm});
    }
    std::vector<std::string> ids;
    ids.reserve(prepared.size());
    std::unique_lock lock(mutex_);
    for (auto& e : prepared) {
        auto id = chunk_id(e.item.chunk);
        entries_.insert_or_assign(id, std::move(e));
        ids.push_back(std::move(id));
    }
    return ids;
}

std::optional<EmbeddedChunk> VectorStore::fetch(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.item;
}

std::size_t VectorStore::remove_doc(const std::string& doc_id) {
    std::unique_lock lock(mutex_);
    return std::erase_if(entries_, [&](const auto& kv) { return kv.second.item.chunk.doc_id == doc_id; });
}

std::size_t VectorStore::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::vector<RetrievalHit> VectorStore::query_vector(std::span<const double> query,
                                                    std::size_t k) const {
    if (k == 0) throw UsageError("k must be >= 1");
    if (query.size() != dim_) throw DimMismatch(dim_, query.size());
    const double qnorm = l2_norm(query);
    if (qnorm == 0.0) throw DataError("query vector has zero norm");

    std::shared_lock lock(mutex_);
    if (entries_.empty()) throw EmptyStore();

    std::vector<RetrievalHit> hits;
    hits.reserve(entries_.size());
    for (const auto& [id, e] : entries_) {
        hits.push_back({e.item.chunk, dot(query, e.item.vector) / (qnorm * e.norm)});
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      hit_before);
    hits.resize(keep);
    return hits;
}

std::string VectorStore::to_json() const {
    std::shared_lock lock(mutex_);
    nlohmann::ordered_json root;
    root["format"] = "vulnllm-index";
    root["version"] = 1;
    root["dim"] = dim_;
    root["embedder"] = fingerprint_;
    auto entries = nlohmann::ordered_json::array();
    for (const auto& [id, e] : entries_) {
        nlohmann::ordered_json j;
        j["id"] = id;
        j["doc_id"] = e.item.chunk.doc_id;
        j["ordinal"] = e.item.chunk.ordinal;
        j["token_start"] = e.item.chunk.token_start;
        j["token_end"] = e.item.chunk.token_end;
        j["text"] = e.item.chunk.text;
        j["vector"] = e.item.vector;
        entries.push_back(std::move(j));
    }
    root["entries"] = std::move(entries);
    return root.dump() + "\n";
}

VectorStore VectorStore::from_json(std::string_view text) {
    try {
        const auto root = nlohmann::json::parse(text);
        if (root.value("format", "") != "vulnllm-index" || root.value("version", 0) != 1) {
            throw DataError("not a version-1 vector index file");
        }
        VectorStore store(root.at("dim").get<std::size_t>(), root.at("embedder").get<std::string>());
        std::vector<EmbeddedChunk> items;
        for (const auto& j : root.at("entries")) {
            EmbeddedChunk c;
            c.chunk.doc_id = j.at("doc_id").get<std::string>();
            c.chunk.ordinal = j.at("ordinal").get<std::size_t>();
            c.chunk.token_start = j.at("token_start").get<std::size_t>();
            c.chunk.token_end = j.at("token_end").get<std::size_t>();
            c.chunk.text = j.at("text").get<std::string>();
            c.vector = j.at("vector").get<Vector>();
            items.push_back(std::move(c));
        }
        store.upsert(items);
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed vector index: ") + e.what());
    }
}

void VectorStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json();
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read index '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<RetrievalHit> query(const VectorStore& store, const Embedder& embedder,
                                std::string_view query_text, std::size_t k) {
    if (store.empty()) throw EmptyStore();
    if (embedder.dim() != store.dim()) throw DimMismatch(store.dim(), embedder.dim());
    const auto q = embedder.embed(query_text);
    return store.query_vector(q, k);
}

std::vector<RetrievalHit> rerank(std::span<const RetrievalHit> hits, std::size_t context_budget,
                                 std::size_t per_doc_cap) {
    std::vector<RetrievalHit> ordered(hits.begin(), hits.end());
    std::stable_sort(ordered.begin(), ordered.end(), hit_before);
    std::vector<RetrievalHit> out;
    std::map<std::string, std::size_t> per_doc;
    for (auto& h : ordered) {
        if (out.size() == context_budget) break;
        auto& n = per_doc[h.chunk.doc_id];
        if (n == per_doc_cap) continue;
        ++n;
        out.push_back(std::move(h));
    }
    return out;
}

std::size_t index_knowledge(const knowledge::KnowledgeStore& store, const Embedder& embedder,
                            VectorStore& index) {
    if (embedder.dim() != index.dim()) throw DimMismatch(index.dim(), embedder.dim());
    const auto chunks = store.all_chunks();
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) texts.push_back(c.text);
    const auto vectors = embedder.embed_batch(texts);

    std::vector<EmbeddedChunk> items;
    items.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) items.push_back({chunks[i], vectors[i]});
    index.upsert(items);
    return items.size();
}

}  // namespace vulnllm::index
