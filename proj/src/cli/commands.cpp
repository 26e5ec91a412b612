#include "vulnllm/cli.hpp"

#include "vulnllm/error.hpp"
#include "vulnllm/hash.hpp"
#include "vulnllm/knowledge.hpp"
#include "vulnllm/vector_index.hpp"
#include "prompt_templates.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace vulnllm::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_bytes(const fs::path& path, std::string_view data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << data;
}

std::string short_id(std::string_view material) { return sha256_hex(material).substr(0, 16); }

std::string run_id_for(const std::string& config_hash, std::uint64_t seed) {
    return short_id(config_hash + ":" + std::to_string(seed));
}

std::vector<ordered_json> read_jsonl(const fs::path& path) {
    std::vector<ordered_json> lines;
    std::istringstream in(read_bytes(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            lines.push_back(ordered_json::parse(line));
        } catch (const nlohmann::json::parse_error&) {
            // A run killed mid-write can leave one truncated trailing line.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw MalformedRow(n, "invalid JSON in '" + path.string() + "'");
        }
    }
    return lines;
}

ordered_json verdict_json(const llm::Verdict& v) {
    ordered_json j;
    j["label"] = llm::to_string(v.label);
    j["reasoning"] = v.reasoning;
    j["raw"] = v.raw;
    return j;
}

struct RunStamp {
    std::string run_id;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string truth_hash;
};

ordered_json detection_line(const corpus::VulnRecord& r, const strategies::Detection& det,
                            const RunStamp& stamp) {
    ordered_json j;
    j["record_id"] = r.record_id();
    j["cwe_id"] = r.cwe_id;
    j["strategy"] = strategies::to_string(det.strategy);
    j["status"] = "ok";
    j["label"] = llm::to_string(det.verdict.label);
    j["reasoning"] = det.verdict.reasoning;
    j["raw"] = det.verdict.raw;
    j["prompt_hash"] = det.calls.empty() ? std::string() : det.calls.front().prompt_hash;
    if (det.strategy == strategies::StrategyKind::rag) {
        j["retrieved"] = det.retrieved_ids;
        j["context"] = det.context_ids;
    }
    if (det.dual) {
        j["detector"] = verdict_json(det.dual->detector);
        j["validator"] = verdict_json(det.dual->validator);
        j["revised"] = det.dual->revised;
    }
    j["run_id"] = stamp.run_id;
    j["config_hash"] = stamp.config_hash;
    j["seed"] = stamp.seed;
    j["truth_hash"] = stamp.truth_hash;
    return j;
}

ordered_json error_line(const corpus::VulnRecord& r, strategies::StrategyKind kind,
                        const std::string& error, const strategies::Detection* partial,
                        const RunStamp& stamp) {
    ordered_json j;
    j["record_id"] = r.record_id();
    j["cwe_id"] = r.cwe_id;
    j["strategy"] = strategies::to_string(kind);
    j["status"] = "error";
    j["error"] = error;
    if (partial && partial->dual) j["detector"] = verdict_json(partial->dual->detector);
    j["run_id"] = stamp.run_id;
    j["config_hash"] = stamp.config_hash;
    j["seed"] = stamp.seed;
    j["truth_hash"] = stamp.truth_hash;
    return j;
}

void append_calls(std::string& out, const corpus::VulnRecord& r,
                  const std::vector<strategies::CallRecord>& calls, const llm::ChatRequest& settings,
                  const RunStamp& stamp) {
    for (const auto& c : calls) {
        ordered_json j;
        j["run_id"] = stamp.run_id;
        j["record_id"] = r.record_id();
        j["stage"] = c.stage;
        j["prompt_hash"] = c.prompt_hash;
        j["model"] = settings.model;
        j["temperature"] = settings.temperature;
        j["max_tokens"] = settings.max_tokens;
        j["system"] = c.system;
        j["user"] = c.user;
        j["response"] = c.response;
        j["attempts"] = c.attempts;
        out += j.dump() + "\n";
    }
}

fs::path default_transcript(const fs::path& out_path) {
    auto p = out_path;
    if (p.extension() == ".jsonl") p.replace_extension();
    p += ".transcript.jsonl";
    return p;
}

}  // namespace

IngestSummary cmd_ingest(const IngestOptions& opts) {
    const auto& cfg = opts.config;
    cfg.chunking.validate();
    if (opts.index_path.empty()) throw UsageError("ingest requires an index path");
    const auto store_path =
        opts.store_path.empty() ? fs::path(opts.index_path.string() + ".knowledge.json") : opts.store_path;

    const auto docs = knowledge::load_directory(opts.knowledge_dir);
    const auto embedder = index::make_embedder(cfg.embedder);

    auto store = fs::exists(store_path) ? knowledge::KnowledgeStore::load(store_path)
                                        : knowledge::KnowledgeStore{};
    auto vectors = fs::exists(opts.index_path)
                       ? index::VectorStore::load(opts.index_path)
                       : index::VectorStore(embedder->dim(), embedder->fingerprint());
    if (vectors.fingerprint() != embedder->fingerprint()) {
        throw DataError("index '" + opts.index_path.string() + "' was built with embedder '" +
                        vectors.fingerprint() + "', not '" + embedder->fingerprint() + "'");
    }

    if (!opts.overwrite) {
        for (const auto& d : docs) {
            if (store.contains(d.doc_id)) throw DuplicateDoc(d.doc_id);
        }
    }

    IngestSummary summary;
    std::vector<knowledge::KnowledgeChunk> fresh;
    for (const auto& d : docs) {
        summary.chunks += store.ingest_document(d, cfg.chunking, opts.overwrite);
        vectors.remove_doc(d.doc_id);
        const auto chunks = store.chunks(d.doc_id);
        fresh.insert(fresh.end(), chunks.begin(), chunks.end());
        ++summary.docs;
    }

    std::vector<std::string> texts;
    texts.reserve(fresh.size());
    for (const auto& c : fresh) texts.push_back(c.text);
    const auto embedded = embedder->embed_batch(texts);
    std::vector<index::EmbeddedChunk> items;
    items.reserve(fresh.size());
    for (std::size_t i = 0; i < fresh.size(); ++i) items.push_back({fresh[i], embedded[i]});
    vectors.upsert(items);
    summary.vectors = items.size();

    if (store_path.has_parent_path()) fs::create_directories(store_path.parent_path());
    if (opts.index_path.has_parent_path()) fs::create_directories(opts.index_path.parent_path());
    store.save(store_path);
    vectors.save(opts.index_path);
    return summary;
}

PrepareSummary cmd_prepare(const PrepareOptions& opts) {
    if (opts.out_dir.empty()) throw UsageError("prepare requires an output directory");
    const auto corpus_bytes = read_bytes(opts.corpus_path);
    const auto records =
        corpus::parse_records(corpus_bytes, corpus::format_from_path(opts.corpus_path.string()));
    const std::set<std::string> cwes(opts.cwes.begin(), opts.cwes.end());
    const auto instruction =
        opts.instruction.value_or(std::string(strategies::templates::classification_system_v1));
    const auto seed = opts.config.seed;

    ordered_json settings;
    settings["command"] = "prepare";
    settings["corpus_sha256"] = sha256_hex(corpus_bytes);
    settings["cwes"] = cwes;
    settings["train_total"] = opts.train_total;
    settings["test_total"] = opts.test_total;
    settings["instruction_sha256"] = sha256_hex(instruction);
    const auto config_hash = sha256_hex(settings.dump());

    PrepareSummary summary;
    summary.split = corpus::balance_split(records, cwes, opts.train_total, opts.test_total, seed);
    const auto& split = summary.split;

    summary.train_path = opts.out_dir / "train.jsonl";
    summary.test_path = opts.out_dir / "test.jsonl";
    summary.sft_path = opts.out_dir / "sft_train.jsonl";
    summary.manifest_path = opts.out_dir / "split_manifest.json";

    write_bytes(summary.train_path, corpus::serialize_records(split.train, corpus::Format::jsonl));
    write_bytes(summary.test_path, corpus::serialize_records(split.test, corpus::Format::jsonl));
    std::ostringstream sft;
    corpus::write_sft_jsonl(sft, corpus::export_sft(split.train, instruction));
    write_bytes(summary.sft_path, sft.str());

    ordered_json manifest;
    manifest["run_id"] = run_id_for(config_hash, seed);
    manifest["config_hash"] = config_hash;
    manifest["seed"] = seed;
    manifest["settings"] = settings;
    manifest["duplicates_dropped"] = split.duplicates_dropped;
    auto& counts = manifest["per_cwe_counts"] = ordered_json::object();
    for (const auto& [cwe, c] : split.per_cwe_counts) {
        counts[cwe] = {{"train", {{"vulnerable", c.train.vulnerable}, {"non_vulnerable", c.train.non_vulnerable}}},
                       {"test", {{"vulnerable", c.test.vulnerable}, {"non_vulnerable", c.test.non_vulnerable}}}};
    }
    manifest["files"] = {{"train", "train.jsonl"}, {"test", "test.jsonl"}, {"sft", "sft_train.jsonl"}};
    write_bytes(summary.manifest_path, manifest.dump(2) + "\n");
    return summary;
}

DetectSummary cmd_detect(const DetectOptions& opts) {
    using strategies::StrategyKind;
    const auto& cfg = opts.config;
    if (opts.out_path.empty()) throw UsageError("detect requires an output path");

    const auto test_bytes = read_bytes(opts.test_path);
    const auto records =
        corpus::parse_records(test_bytes, corpus::format_from_path(opts.test_path.string()));
    const std::string strategy_name(strategies::to_string(opts.strategy));
    const auto& chat = cfg.chat_for(strategy_name);

    if (opts.strategy == StrategyKind::sft && !opts.backend &&
        chat.backend.kind == llm::BackendKind::remote && chat.backend.model.empty()) {
        throw UsageError("sft strategy needs the fine-tuned model name ([backend.sft] model)");
    }

    std::optional<index::VectorStore> vectors;
    std::unique_ptr<index::Embedder> embedder;
    std::optional<index::IndexRetriever> retriever;
    std::string index_sha;
    if (opts.strategy == StrategyKind::rag) {
        if (!opts.index_path) throw UsageError("rag strategy requires --index");
        const auto index_bytes = read_bytes(*opts.index_path);
        index_sha = sha256_hex(index_bytes);
        vectors = index::VectorStore::from_json(index_bytes);
        if (vectors->empty()) throw EmptyStore();
        embedder = index::make_embedder(cfg.embedder);
        if (vectors->fingerprint() != embedder->fingerprint()) {
            throw DataError("index was built with embedder '" + vectors->fingerprint() +
                            "' but the configured embedder is '" + embedder->fingerprint() + "'");
        }
        retriever.emplace(*vectors, *embedder);
    }

    ordered_json settings;
    settings["command"] = "detect";
    settings["strategy"] = strategy_name;
    settings["prompt_version"] = strategies::kPromptVersion;
    if (opts.backend) {
        settings["backend"] = "injected";
    } else {
        settings["backend"] = {
            {"kind", chat.backend.kind == llm::BackendKind::mock ? "mock" : "remote"},
            {"endpoint", chat.backend.endpoint},
            {"model", chat.backend.model},
            {"mock_script_sha256",
             chat.backend.mock_script.empty() ? std::string() : sha256_hex(read_bytes(chat.backend.mock_script))}};
    }
    settings["temperature"] = chat.temperature;
    settings["max_tokens"] = chat.max_tokens;
    settings["blank_cwe"] = cfg.blank_cwe;
    if (opts.strategy == StrategyKind::rag) {
        settings["k"] = cfg.k;
        settings["context_budget"] = cfg.context_budget;
        settings["index_sha256"] = index_sha;
    }
    settings["truth_sha256"] = sha256_hex(test_bytes);

    RunStamp stamp;
    stamp.config_hash = sha256_hex(settings.dump());
    stamp.seed = cfg.seed;
    stamp.run_id = run_id_for(stamp.config_hash, stamp.seed);
    stamp.truth_hash = settings["truth_sha256"].get<std::string>();

    DetectSummary summary;
    summary.run_id = stamp.run_id;
    summary.config_hash = stamp.config_hash;

    std::unordered_set<std::string> done;
    if (fs::exists(opts.out_path)) {
        for (const auto& line : read_jsonl(opts.out_path)) {
            if (line.value("config_hash", "") != stamp.config_hash) {
                throw UsageError("'" + opts.out_path.string() +
                                 "' holds results from a different configuration; choose a new output");
            }
            if (line.value("status", "") == "ok") done.insert(line.value("record_id", ""));
        }
    }

    std::vector<const corpus::VulnRecord*> pending;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.record_id()).second) continue;
        ++summary.total;
        if (done.count(r.record_id())) {
            ++summary.already_done;
            continue;
        }
        pending.push_back(&r);
    }
    if (opts.max_records && pending.size() > *opts.max_records) pending.resize(*opts.max_records);

    auto backend = opts.backend ? opts.backend : llm::make_backend(chat.backend);
    const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
    llm::LlmGateway gateway(backend, chat.backend.retry, jobs);

    strategies::StrategyConfig scfg;
    scfg.kind = opts.strategy;
    scfg.gateway = &gateway;
    scfg.retriever = retriever ? &*retriever : nullptr;
    scfg.k = cfg.k;
    scfg.context_budget = cfg.context_budget;
    scfg.prompt.blank_cwe = cfg.blank_cwe;
    scfg.model = chat.backend.model;
    scfg.temperature = chat.temperature;
    scfg.max_tokens = chat.max_tokens;
    const llm::ChatRequest call_settings{{}, {}, scfg.temperature, scfg.max_tokens, scfg.model};

    const auto transcript_path =
        opts.transcript_path.empty() ? default_transcript(opts.out_path) : opts.transcript_path;
    if (opts.out_path.has_parent_path()) fs::create_directories(opts.out_path.parent_path());
    if (transcript_path.has_parent_path()) fs::create_directories(transcript_path.parent_path());
    std::ofstream verdict_out(opts.out_path, std::ios::binary | std::ios::app);
    std::ofstream transcript_out(transcript_path, std::ios::binary | std::ios::app);
    if (!verdict_out || !transcript_out) throw DataError("cannot open detect outputs for writing");

    struct Outcome {
        std::optional<strategies::Detection> detection;
        std::optional<strategies::Detection> partial;
        std::string error;
        std::optional<ErrorClass> error_class;
    };

    // Records run `jobs` at a time; each batch is written in input order so
    // the output is independent of scheduling.
    for (std::size_t begin = 0; begin < pending.size(); begin += jobs) {
        const auto end = std::min(pending.size(), begin + jobs);
        std::vector<std::future<Outcome>> futures;
        for (std::size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [&, rec = pending[i]] {
                Outcome o;
                try {
                    o.detection = strategies::detect(*rec, scfg);
                } catch (const strategies::StageFailure& e) {
                    o.partial = e.partial();
                    o.error = e.what();
                    o.error_class = e.error_class();
                } catch (const Error& e) {
                    o.error = e.what();
                    o.error_class = e.error_class();
                }
                return o;
            }));
        }
        std::string verdict_chunk;
        std::string transcript_chunk;
        for (std::size_t i = begin; i < end; ++i) {
            auto o = futures[i - begin].get();
            const auto& rec = *pending[i];
            if (o.error_class && *o.error_class == ErrorClass::usage) throw UsageError(o.error);
            if (o.detection) {
                verdict_chunk += detection_line(rec, *o.detection, stamp).dump() + "\n";
                append_calls(transcript_chunk, rec, o.detection->calls, call_settings, stamp);
                ++summary.processed;
            } else {
                const auto* partial = o.partial ? &*o.partial : nullptr;
                verdict_chunk += error_line(rec, opts.strategy, o.error, partial, stamp).dump() + "\n";
                if (partial) append_calls(transcript_chunk, rec, partial->calls, call_settings, stamp);
                ordered_json err;
                err["run_id"] = stamp.run_id;
                err["record_id"] = rec.record_id();
                err["status"] = "error";
                err["error"] = o.error;
                transcript_chunk += err.dump() + "\n";
                ++summary.failed;
            }
        }
        verdict_out << verdict_chunk << std::flush;
        transcript_out << transcript_chunk << std::flush;
    }
    return summary;
}

eval::ReportArtifacts cmd_eval(const EvalOptions& opts) {
    if (opts.verdict_paths.empty()) throw NoResults();
    if (opts.out_dir.empty()) throw UsageError("eval requires an output directory");

    const auto truth_bytes = read_bytes(opts.truth_path);
    const auto truth_hash = sha256_hex(truth_bytes);
    const auto truth =
        corpus::parse_records(truth_bytes, corpus::format_from_path(opts.truth_path.string()));

    std::vector<const corpus::VulnRecord*> unique_truth;
    std::unordered_set<std::string> seen;
    std::vector<std::string> cwe_order = opts.cwes;
    for (const auto& r : truth) {
        if (!seen.insert(r.record_id()).second) continue;
        unique_truth.push_back(&r);
        if (opts.cwes.empty() &&
            std::find(cwe_order.begin(), cwe_order.end(), r.cwe_id) == cwe_order.end()) {
            cwe_order.push_back(r.cwe_id);
        }
    }

    eval::ReportInputs inputs;
    inputs.baseline = opts.baseline;
    inputs.cwes = cwe_order;
    std::string combined_hashes;
    std::optional<std::uint64_t> seed;
    std::set<std::string> strategies_seen;

    for (const auto& path : opts.verdict_paths) {
        std::unordered_map<std::string, ordered_json> latest;
        std::string strategy;
        std::string config_hash;
        for (auto& line : read_jsonl(path)) {
            const auto line_strategy = line.value("strategy", "");
            if (strategy.empty()) strategy = line_strategy;
            if (line_strategy != strategy) {
                throw DataError("'" + path.string() + "' mixes strategies " + strategy + " and " + line_strategy);
            }
            if (line.value("truth_hash", "") != truth_hash) {
                throw DataError("'" + path.string() + "' was produced against a different truth file");
            }
            const auto line_hash = line.value("config_hash", "");
            if (config_hash.empty()) config_hash = line_hash;
            if (line_hash != config_hash) {
                throw DataError("'" + path.string() + "' mixes results from different configurations");
            }
            const auto line_seed = line.value("seed", std::uint64_t{0});
            if (seed && *seed != line_seed) throw DataError("verdict files disagree on the seed");
            seed = line_seed;
            auto id = line.value("record_id", "");
            latest[std::move(id)] = std::move(line);
        }
        if (strategy.empty()) throw NoResults();
        if (!strategies_seen.insert(strategy).second) {
            throw DataError("strategy '" + strategy + "' appears in more than one verdict file");
        }

        std::map<std::string, std::pair<std::vector<llm::Label>, std::vector<int>>> per_cwe;
        std::size_t matched = 0;
        for (const auto* r : unique_truth) {
            const auto it = latest.find(r->record_id());
            if (it == latest.end()) continue;
            ++matched;
            const auto& line = it->second;
            const auto label = line.value("status", "") == "ok"
                                   ? llm::label_from_string(line.value("label", ""))
                                   : llm::Label::unparseable;
            auto& bucket = per_cwe[r->cwe_id];
            bucket.first.push_back(label);
            bucket.second.push_back(r->vul);
        }
        if (matched != unique_truth.size()) throw LengthMismatch(matched, unique_truth.size());

        eval::StrategyResult result;
        result.strategy = strategy;
        for (const auto& [cwe, pair] : per_cwe) {
            result.per_cwe[cwe] = eval::confusion(pair.first, pair.second);
        }
        inputs.results.push_back(std::move(result));
        combined_hashes += config_hash + "\n";
    }

    inputs.seed = seed.value_or(0);
    inputs.config_hash = sha256_hex(combined_hashes + truth_hash);
    inputs.run_id = run_id_for(inputs.config_hash, inputs.seed);

    auto artifacts = eval::emit_report(inputs);
    fs::create_directories(opts.out_dir);
    write_bytes(opts.out_dir / "report.md", artifacts.markdown);
    write_bytes(opts.out_dir / "report.csv", artifacts.csv);
    write_bytes(opts.out_dir / "f1_chart.json", artifacts.chart_json);
    return artifacts;
}

}  // namespace vulnllm::cli
