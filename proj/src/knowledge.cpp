#include "vulnllm/knowledge.hpp"

#include "vulnllm/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace vulnllm::knowledge {

namespace {

constexpr bool is_space(unsigned char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

constexpr bool is_control(unsigned char c) noexcept { return c < 0x20 || c == 0x7f; }

constexpr bool is_word(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c >= 0x80;
}

constexpr std::string_view kOperators[] = {"->", "==", "!=", "<=", ">=",
                                           "&&", "||", "::", "<<", ">>"};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

void ChunkingConfig::validate() const {
    if (chunk_size == 0 || chunk_overlap >= chunk_size) {
        throw UsageError("chunking config requires 0 <= chunk_overlap < chunk_size (got size " +
                         std::to_string(chunk_size) + ", overlap " +
                         std::to_string(chunk_overlap) + ")");
    }
}

std::string clean_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (is_space(c)) {
            pending_space = pending_space || !out.empty();
            continue;
        }
        if (is_control(c)) continue;
        // C1 controls arrive as 0xC2 0x80..0x9F; drop the pair.
        if (c >= 0x80 && c <= 0x9f && !pending_space && !out.empty() &&
            static_cast<unsigned char>(out.back()) == 0xc2) {
            out.pop_back();
            if (!out.empty() && out.back() == ' ') {
                out.pop_back();
                pending_space = true;
            }
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c) || is_control(c) || c == '\v' || c == '\f') {
            ++i;
            continue;
        }
        if (is_word(c)) {
            std::size_t j = i + 1;
            while (j < text.size() && is_word(static_cast<unsigned char>(text[j]))) ++j;
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        const auto two = text.substr(i, 2);
        if (two.size() == 2 &&
            std::find(std::begin(kOperators), std::end(kOperators), two) != std::end(kOperators)) {
            tokens.emplace_back(two);
            i += 2;
            continue;
        }
        tokens.emplace_back(1, static_cast<char>(c));
        ++i;
    }
    return tokens;
}

std::vector<KnowledgeChunk> chunk(const std::vector<std::string>& tokens,
                                  const ChunkingConfig& cfg, std::string_view doc_id) {
    cfg.validate();
    std::vector<KnowledgeChunk> chunks;
    const std::size_t n = tokens.size();
    for (std::size_t start = 0; start < n; start += cfg.stride()) {
        const std::size_t end = std::min(start + cfg.chunk_size, n);
        KnowledgeChunk c;
        c.doc_id = std::string(doc_id);
        c.ordinal = chunks.size();
        c.token_start = start;
        c.token_end = end;
        for (std::size_t t = start; t < end; ++t) {
            if (t != start) c.text.push_back(' ');
            c.text += tokens[t];
        }
        chunks.push_back(std::move(c));
        // Once a window reaches the end, any further window would be a strict
        // suffix of this one.
        if (end == n) break;
    }
    return chunks;
}

std::vector<KnowledgeChunk> chunk_document(const KnowledgeDoc& doc, const ChunkingConfig& cfg) {
    std::string joined;
    for (std::size_t i = 0; i < doc.pages.size(); ++i) {
        if (i) joined.push_back(' ');
        joined += doc.pages[i];
    }
    return chunk(tokenize(clean_text(joined)), cfg, doc.doc_id);
}

KnowledgeStore::KnowledgeStore(const KnowledgeStore& other) {
    std::shared_lock lock(other.mutex_);
    docs_ = other.docs_;
}

KnowledgeStore& KnowledgeStore::operator=(const KnowledgeStore& other) {
    if (this != &other) {
        std::scoped_lock lock(mutex_);
        std::shared_lock other_lock(other.mutex_);
        docs_ = other.docs_;
    }
    return *this;
}

std::size_t KnowledgeStore::ingest_document(const KnowledgeDoc& doc, const ChunkingConfig& cfg,
                                            bool overwrite) {
    if (doc.doc_id.empty()) throw DataError("knowledge document id must not be empty");
    auto chunks = chunk_document(doc, cfg);
    const auto count = chunks.size();
    std::unique_lock lock(mutex_);
    if (!overwrite && docs_.count(doc.doc_id)) throw DuplicateDoc(doc.doc_id);
    docs_[doc.doc_id] = std::move(chunks);
    return count;
}

bool KnowledgeStore::remove(const std::string& doc_id) {
    std::unique_lock lock(mutex_);
    return docs_.erase(doc_id) > 0;
}

void KnowledgeStore::reset() {
    std::unique_lock lock(mutex_);
    docs_.clear();
}

bool KnowledgeStore::contains(const std::string& doc_id) const {
    std::shared_lock lock(mutex_);
    return docs_.count(doc_id) > 0;
}

std::vector<KnowledgeChunk> KnowledgeStore::chunks(const std::string& doc_id) const {
    std::shared_lock lock(mutex_);
    auto it = docs_.find(doc_id);
    return it == docs_.end() ? std::vector<KnowledgeChunk>{} : it->second;
}

std::vector<KnowledgeChunk> KnowledgeStore::all_chunks() const {
    std::shared_lock lock(mutex_);
    std::vector<KnowledgeChunk> out;
    for (const auto& [id, chunks] : docs_) out.insert(out.end(), chunks.begin(), chunks.end());
    return out;
}

std::vector<std::string> KnowledgeStore::doc_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, chunks] : docs_) out.push_back(id);
    return out;
}

std::size_t KnowledgeStore::doc_count() const {
    std::shared_lock lock(mutex_);
    return docs_.size();
}

std::size_t KnowledgeStore::chunk_count() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& [id, chunks] : docs_) n += chunks.size();
    return n;
}

std::string KnowledgeStore::to_json() const {
    std::shared_lock lock(mutex_);
    nlohmann::ordered_json root;
    root["format"] = "vulnllm-knowledge";
    root["version"] = 1;
    auto& docs = root["docs"] = nlohmann::ordered_json::object();
    for (const auto& [id, chunks] : docs_) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& c : chunks) {
            nlohmann::ordered_json j;
            j["ordinal"] = c.ordinal;
            j["token_start"] = c.token_start;
            j["token_end"] = c.token_end;
            j["text"] = c.text;
            arr.push_back(std::move(j));
        }
        docs[id] = std::move(arr);
    }
    return root.dump(1) + "\n";
}

KnowledgeStore KnowledgeStore::from_json(std::string_view text) {
    KnowledgeStore store;
    try {
        const auto root = nlohmann::json::parse(text);
        if (root.value("format", "") != "vulnllm-knowledge" || root.value("version", 0) != 1) {
            throw DataError("not a version-1 knowledge store file");
        }
        for (const auto& [id, arr] : root.at("docs").items()) {
            auto& chunks = store.docs_[id];
            for (const auto& j : arr) {
                chunks.push_back({id, j.at("ordinal").get<std::size_t>(),
                                  j.at("token_start").get<std::size_t>(),
                                  j.at("token_end").get<std::size_t>(),
                                  j.at("text").get<std::string>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed knowledge store: ") + e.what());
    }
    return store;
}

void KnowledgeStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_json();
}

KnowledgeStore KnowledgeStore::load(const std::filesystem::path& path) {
    return from_json(read_file(path));
}

std::vector<KnowledgeDoc> load_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename().string().starts_with(".")) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<KnowledgeDoc> docs;
    std::set<std::string> seen;
    for (const auto& file : files) {
        KnowledgeDoc doc;
        doc.doc_id = file.stem().string();
        if (!seen.insert(doc.doc_id).second) throw DuplicateDoc(doc.doc_id);
        const auto text = read_file(file);
        std::size_t pos = 0;
        while (true) {
            const auto ff = text.find('\f', pos);
            doc.pages.push_back(text.substr(pos, ff == std::string::npos ? ff : ff - pos));
            if (ff == std::string::npos) break;
            pos = ff + 1;
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace vulnllm::knowledge
