#include "vulnllm/error.hpp"
#include "vulnllm/hash.hpp"
#include "vulnllm/vector_index.hpp"

#include "support.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

using namespace vulnllm;
using index::EmbeddedChunk;
using index::RetrievalHit;
using index::Vector;

namespace {

EmbeddedChunk item(const std::string& doc, std::size_t ordinal, Vector v, std::string text = {}) {
    knowledge::KnowledgeChunk c{doc, ordinal, ordinal * 10, ordinal * 10 + 5,
                                text.empty() ? doc + " chunk " + std::to_string(ordinal) : text};
    return {c, std::move(v)};
}

Vector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vector v(dim);
    for (auto& x : v) x = n(rng);
    return v;
}

double norm(const Vector& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Textbook cosine, ranked with a full sort.
std::vector<std::string> exhaustive_top(const std::vector<EmbeddedChunk>& items, const Vector& q, std::size_t k) {
    std::vector<std::pair<double, const EmbeddedChunk*>> scored;
    for (const auto& it : items) {
        double dot = 0;
        for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * it.vector[i];
        scored.emplace_back(dot / (norm(q) * norm(it.vector)), &it);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        if (a.second->chunk.doc_id != b.second->chunk.doc_id) return a.second->chunk.doc_id < b.second->chunk.doc_id;
        return a.second->chunk.ordinal < b.second->chunk.ordinal;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) ids.push_back(index::chunk_id(scored[i].second->chunk));
    return ids;
}

std::vector<std::string> ids_of(const std::vector<RetrievalHit>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.id());
    return out;
}

}  // namespace

TEST_CASE("deterministic embedder") {
    index::DeterministicEmbedder e(256);
    const auto a = e.embed("strcpy into a fixed buffer");
    CHECK(a == e.embed("strcpy into a fixed buffer"));
    CHECK(a.size() == 256);
    CHECK(std::fabs(norm(a) - 1.0) < 1e-9);
    CHECK(e.fingerprint() == "deterministic-fnv1a-v1/dim=256");
    CHECK_THROWS_AS(e.embed("  \t "), EmptyText);
}

TEST_CASE("deterministic embedder matches an independent rehash") {
    // Same construction as documented: bucket fnv1a64(token) % dim, sign from bit 32.
    auto reference = [](const std::vector<std::string>& tokens, std::size_t dim) {
        Vector v(dim, 0.0);
        for (auto t : tokens) {
            std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
            std::uint64_t h = 14695981039346656037ULL;
            for (unsigned char c : t) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            v[h % dim] += (h >> 32) & 1 ? -1.0 : 1.0;
        }
        const double n = norm(v);
        for (auto& x : v) x /= n;
        return v;
    };
    index::DeterministicEmbedder e(256);
    const auto got = e.embed("Buffer overflow in memcpy");
    const auto want = reference({"Buffer", "overflow", "in", "memcpy"}, 256);
    for (std::size_t i = 0; i < 256; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("disjoint texts are nearly orthogonal") {
    index::DeterministicEmbedder e(256);
    std::mt19937_64 rng(5);
    double total = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::string a, b;
        for (int i = 0; i < 8; ++i) {
            a += "alpha" + std::to_string(rng() % 100000) + " ";
            b += "beta" + std::to_string(rng() % 100000) + " ";
        }
        total += std::fabs(index::cosine(e.embed(a), e.embed(b)));
    }
    // 64 token pairs over 256 buckets collide about 0.25 times per trial.
    CHECK(total / 200 < 0.06);
}

TEST_CASE("upsert, fetch and replace") {
    index::VectorStore store(3, "test");
    store.upsert(std::vector{item("d", 0, {1, 0, 0})});
    const auto got = store.fetch("d#0");
    REQUIRE(got);
    CHECK(got->chunk.text == "d chunk 0");
    store.upsert(std::vector{item("d", 0, {0, 1, 0}, "replacement")});
    CHECK(store.size() == 1);
    CHECK(store.fetch("d#0")->chunk.text == "replacement");
    CHECK_FALSE(store.fetch("d#1"));

    CHECK_THROWS_AS(store.upsert(std::vector{item("d", 1, {1, 0})}), DimMismatch);
    CHECK_THROWS_AS(store.upsert(std::vector{item("d", 1, {0, 0, 0})}), DataError);
    CHECK_THROWS_AS(store.upsert(std::vector{item("d", 1, {NAN, 0, 1})}), DataError);
}

TEST_CASE("1000 random chunks are all stored") {
    std::mt19937_64 rng(1);
    index::VectorStore store(16, "test");
    std::vector<EmbeddedChunk> items;
    for (std::size_t i = 0; i < 1000; ++i) items.push_back(item("doc" + std::to_string(i % 37), i, random_vector(rng, 16)));
    store.upsert(items);
    CHECK(store.size() == 1000);
    CHECK(store.remove_doc("doc0") == 28);
    CHECK(store.size() == 972);
}

TEST_CASE("query ranks self first and truncates to the store") {
    index::DeterministicEmbedder e(256);
    index::VectorStore store(256, e.fingerprint());
    const std::vector<std::string> texts = {"heap overflow in png decoder", "missing permission check on ioctl",
                                            "uninitialised stack memory copied to user"};
    std::vector<EmbeddedChunk> items;
    for (std::size_t i = 0; i < texts.size(); ++i) items.push_back(item("k" + std::to_string(i), 0, e.embed(texts[i]), texts[i]));
    store.upsert(items);
    const auto hits = index::query(store, e, texts[1], 20);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].chunk.doc_id == "k1");
    CHECK(std::fabs(hits[0].score - 1.0) < 1e-9);

    index::VectorStore empty(256, e.fingerprint());
    CHECK_THROWS_AS(index::query(empty, e, "x"), EmptyStore);
    CHECK_THROWS_AS(index::query(store, e, "x", 0), UsageError);
}

TEST_CASE("top-k equals exhaustive cosine ranking") {
    std::mt19937_64 rng(77);
    index::VectorStore store(256, "test");
    std::vector<EmbeddedChunk> items;
    for (std::size_t i = 0; i < 1000; ++i) items.push_back(item("doc" + std::to_string(i % 50), i, random_vector(rng, 256)));
    store.upsert(items);
    for (int q = 0; q < 20; ++q) {
        const auto query = random_vector(rng, 256);
        CHECK(ids_of(store.query_vector(query, 20)) == exhaustive_top(items, query, 20));
    }
}

TEST_CASE("ties break by doc id then ordinal") {
    index::VectorStore store(2, "test");
    store.upsert(std::vector{item("b", 1, {1, 0}), item("a", 2, {2, 0}), item("b", 0, {3, 0}), item("c", 0, {0, 1})});
    CHECK(ids_of(store.query_vector(Vector{1, 0}, 4)) == std::vector<std::string>{"a#2", "b#0", "b#1", "c#0"});
}

namespace {

// The greedy rule, written out literally.
std::vector<std::string> greedy_oracle(std::vector<RetrievalHit> hits, std::size_t budget, std::size_t cap) {
    std::stable_sort(hits.begin(), hits.end(), index::hit_before);
    std::vector<std::string> kept;
    std::map<std::string, std::size_t> per_doc;
    for (const auto& h : hits) {
        if (kept.size() == budget) break;
        if (per_doc[h.chunk.doc_id] == cap) continue;
        ++per_doc[h.chunk.doc_id];
        kept.push_back(h.id());
    }
    return kept;
}

RetrievalHit hit(const std::string& doc, std::size_t ordinal, double score) {
    return {knowledge::KnowledgeChunk{doc, ordinal, 0, 1, "t"}, score};
}

}  // namespace

TEST_CASE("rerank") {
    SUBCASE("distinct documents keep the top five") {
        std::vector<RetrievalHit> hits;
        for (int i = 0; i < 20; ++i) hits.push_back(hit("d" + std::to_string(i), 0, 1.0 - i * 0.01));
        const auto out = index::rerank(hits, 5);
        CHECK(ids_of(out) == std::vector<std::string>{"d0#0", "d1#0", "d2#0", "d3#0", "d4#0"});
    }
    SUBCASE("one document is capped at two") {
        std::vector<RetrievalHit> hits;
        for (std::size_t i = 0; i < 20; ++i) hits.push_back(hit("only", i, 1.0 - i * 0.01));
        CHECK(index::rerank(hits, 5).size() == 2);
    }
    SUBCASE("random mixtures match the greedy oracle") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<RetrievalHit> hits;
            const auto n = rng() % 25;
            for (std::size_t i = 0; i < n; ++i) {
                hits.push_back(hit("d" + std::to_string(rng() % 5), i, static_cast<double>(rng() % 7) / 7.0));
            }
            const auto budget = 1 + rng() % 6;
            const auto cap = 1 + rng() % 3;
            const auto out = index::rerank(hits, budget, cap);
            CHECK(ids_of(out) == greedy_oracle(hits, budget, cap));
            for (const auto& h : out) {
                CHECK(std::any_of(hits.begin(), hits.end(), [&](const RetrievalHit& x) { return x.id() == h.id(); }));
            }
        }
    }
}

TEST_CASE("index persistence is byte-stable") {
    testing::TempDir dir;
    index::DeterministicEmbedder e(64);
    knowledge::KnowledgeStore ks;
    ks.ingest_document({"CWE-20", {"Improper input validation of lengths and offsets"}}, {4, 1});
    ks.ingest_document({"CWE-200", {"Exposure of sensitive information"}}, {4, 1});
    index::VectorStore store(64, e.fingerprint());
    CHECK(index::index_knowledge(ks, e, store) == ks.chunk_count());
    store.save(dir / "index.json");
    const auto loaded = index::VectorStore::load(dir / "index.json");
    CHECK(loaded.size() == store.size());
    CHECK(loaded.fingerprint() == e.fingerprint());
    CHECK(loaded.to_json() == store.to_json());
    const auto q = e.embed("input validation");
    CHECK(ids_of(loaded.query_vector(q, 5)) == ids_of(store.query_vector(q, 5)));
    CHECK_THROWS_AS(index::VectorStore::from_json(R"({"format":"other"})"), DataError);
}

TEST_CASE("remote embedder speaks the embeddings wire format") {
    httplib::Server server;
    std::atomic<int> requests{0};
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        const auto body = nlohmann::json::parse(req.body);
        CHECK(body.at("model") == "embed-small");
        CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
        nlohmann::json data = nlohmann::json::array();
        const auto& input = body.at("input");
        // Answer in reverse order to exercise index-based reassembly.
        for (std::size_t i = input.size(); i-- > 0;) {
            const double len = static_cast<double>(input[i].get<std::string>().size());
            data.push_back({{"index", i}, {"embedding", {len, 1.0, 0.0}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("VULNLLM_TEST_EMBED_TOKEN", "sekrit", 1);
    index::EmbedderSpec spec;
    spec.kind = index::EmbedderKind::remote;
    spec.dim = 3;
    spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    spec.model = "embed-small";
    spec.auth_env = "VULNLLM_TEST_EMBED_TOKEN";
    spec.batch_size = 2;
    auto e = index::make_embedder(spec);
    const std::vector<std::string> texts = {"a", "bb", "ccc", "dddd", "eeeee"};
    const auto out = e->embed_batch(texts);
    REQUIRE(out.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(out[i][0] == static_cast<double>(i + 1));
    CHECK(requests == 3);

    spec.dim = 4;
    CHECK_THROWS_AS(index::make_embedder(spec)->embed_batch(texts), DimMismatch);

    server.stop();
    th.join();
}

TEST_CASE("remote embedder reports an unreachable endpoint") {
    index::EmbedderSpec spec;
    spec.kind = index::EmbedderKind::remote;
    spec.endpoint = "http://127.0.0.1:1/v1/embeddings";
    spec.retry.max_attempts = 2;
    spec.retry.sleeper = [](std::chrono::milliseconds) {};
    spec.timeout = std::chrono::milliseconds(500);
    CHECK_THROWS_AS(index::make_embedder(spec)->embed_batch(std::vector<std::string>{"x"}), EmbedderUnavailable);
}
