#include "vulnllm/cli.hpp"

#include "vulnllm/error.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <iostream>
#include <sstream>

namespace vulnllm::cli {

namespace {

constexpr int kExitUsage = static_cast<int>(ErrorClass::usage);

config::RunConfig load_config(const std::string& path) {
    return path.empty() ? config::RunConfig{} : config::load_run_config(path);
}

void print_shortfalls(std::ostream& err, const InsufficientSamples& e) {
    err << "insufficient samples:\n";
    for (const auto& s : e.shortfalls()) {
        fmt::print(err, "  {} {}: need {}, have {}\n", s.cwe,
                   s.label ? "vulnerable" : "non-vulnerable", s.needed, s.available);
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"LLM-based vulnerability detection pipeline", "vulnllm"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Chunk and index a knowledge directory");
    IngestOptions io;
    std::string io_dir, io_index, io_store;
    ingest->add_option("--knowledge", io_dir, "Directory of knowledge documents")
        ->required()
        ->check(CLI::ExistingDirectory);
    ingest->add_option("--index", io_index, "Vector index file (created or extended)")->required();
    ingest->add_option("--store", io_store, "Knowledge store file (default <index>.knowledge.json)");
    ingest->add_flag("--overwrite", io.overwrite, "Replace documents that are already ingested");
    std::size_t chunk_size = 0, chunk_overlap = 0;
    auto* chunk_size_opt = ingest->add_option("--chunk-size", chunk_size, "Tokens per chunk");
    auto* chunk_overlap_opt = ingest->add_option("--chunk-overlap", chunk_overlap, "Tokens shared by neighbours");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Build the balanced train/test split and SFT data");
    PrepareOptions po;
    std::string po_corpus, po_out, po_instruction;
    prepare->add_option("--corpus", po_corpus, "Corpus CSV or JSONL")->required()->check(CLI::ExistingFile);
    prepare->add_option("--cwes", po.cwes, "CWE identifiers to keep")->required()->delimiter(',');
    prepare->add_option("--train-total", po.train_total, "Training records");
    prepare->add_option("--test-total", po.test_total, "Test records");
    prepare->add_option("--out", po_out, "Output directory");
    auto* instruction_opt = prepare->add_option("--instruction", po_instruction, "SFT instruction text");
    std::uint64_t seed = 0;
    auto* prepare_seed_opt = prepare->add_option("--seed", seed, "Random seed");

    // detect
    auto* detect = app.add_subcommand("detect", "Classify every test record with one strategy");
    DetectOptions dopt;
    std::string d_test, d_strategy, d_out, d_transcript, d_index;
    std::size_t max_records = 0;
    std::size_t jobs = 0;
    detect->add_option("--test", d_test, "Test records (JSONL or CSV)")->required()->check(CLI::ExistingFile);
    detect->add_option("--strategy", d_strategy, "base, rag, sft or dual")
        ->required()
        ->check(CLI::IsMember({"base", "rag", "sft", "dual"}));
    detect->add_option("--out", d_out, "Verdicts JSONL (resumed when present)")->required();
    detect->add_option("--transcript", d_transcript, "Transcript JSONL");
    auto* index_opt = detect->add_option("--index", d_index, "Vector index (rag)")->check(CLI::ExistingFile);
    auto* max_opt = detect->add_option("--max-records", max_records, "Process at most this many new records");
    auto* jobs_opt = detect->add_option("--jobs", jobs, "Concurrent records")->check(CLI::PositiveNumber);
    auto* detect_seed_opt = detect->add_option("--seed", seed, "Run seed recorded with every verdict");

    // eval
    auto* evalc = app.add_subcommand("eval", "Score verdict files and write the report");
    EvalOptions eo;
    std::vector<std::string> e_verdicts;
    std::string e_truth, e_out;
    evalc->add_option("--verdicts", e_verdicts, "Verdict JSONL files, one per strategy")->required()->check(CLI::ExistingFile);
    evalc->add_option("--truth", e_truth, "Test records the verdicts refer to")->required()->check(CLI::ExistingFile);
    evalc->add_option("--out", e_out, "Report directory");
    evalc->add_option("--baseline", eo.baseline, "Strategy the t-tests compare against");
    evalc->add_option("--cwes", eo.cwes, "Row order")->delimiter(',');

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front()) {
            err << sub->help();
        }
        return kExitUsage;
    }

    try {
        auto cfg = load_config(config_path);
        if (*ingest) {
            io.knowledge_dir = io_dir;
            io.index_path = io_index;
            io.store_path = io_store;
            if (chunk_size_opt->count()) cfg.chunking.chunk_size = chunk_size;
            if (chunk_overlap_opt->count()) cfg.chunking.chunk_overlap = chunk_overlap;
            io.config = cfg;
            const auto s = cmd_ingest(io);
            fmt::print(out, "ingested {} documents, {} chunks, {} vectors\n", s.docs, s.chunks, s.vectors);
        } else if (*prepare) {
            po.corpus_path = po_corpus;
            po.out_dir = po_out.empty() ? cfg.output_dir : std::filesystem::path(po_out);
            if (instruction_opt->count()) po.instruction = po_instruction;
            if (prepare_seed_opt->count()) cfg.seed = seed;
            po.config = cfg;
            const auto s = cmd_prepare(po);
            fmt::print(out, "train {} records, test {} records, {} duplicates dropped\n", s.split.train.size(),
                       s.split.test.size(), s.split.duplicates_dropped);
            fmt::print(out, "wrote {}\n", s.manifest_path.string());
        } else if (*detect) {
            dopt.test_path = d_test;
            dopt.strategy = strategies::strategy_from_string(d_strategy);
            dopt.out_path = d_out;
            dopt.transcript_path = d_transcript;
            if (index_opt->count()) dopt.index_path = d_index;
            if (max_opt->count()) dopt.max_records = max_records;
            if (jobs_opt->count()) cfg.jobs = jobs;
            if (detect_seed_opt->count()) cfg.seed = seed;
            dopt.config = cfg;
            const auto s = cmd_detect(dopt);
            fmt::print(out, "run {}: {} records, {} already done, {} processed, {} failed\n", s.run_id,
                       s.total, s.already_done, s.processed, s.failed);
            if (s.failed > 0) {
                fmt::print(err, "{} records failed; rerun the same command to retry them\n", s.failed);
                return static_cast<int>(ErrorClass::backend);
            }
        } else if (*evalc) {
            eo.verdict_paths.assign(e_verdicts.begin(), e_verdicts.end());
            eo.truth_path = e_truth;
            eo.out_dir = e_out.empty() ? cfg.output_dir : std::filesystem::path(e_out);
            const auto artifacts = cmd_eval(eo);
            out << artifacts.markdown;
        }
        return 0;
    } catch (const InsufficientSamples& e) {
        print_shortfalls(err, e);
        return static_cast<int>(e.error_class());
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.error_class());
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorClass::data);
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace vulnllm::cli
