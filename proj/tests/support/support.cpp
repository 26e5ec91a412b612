#include "support.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#ifndef VULNLLM_SOURCE_DIR
#error "VULNLLM_SOURCE_DIR must be defined"
#endif

namespace vulnllm::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            fmt::format("vulnllm-test-{}-{:08x}", counter++, rd());
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path source_dir() { return fs::path(VULNLLM_SOURCE_DIR) / "tests"; }

corpus::VulnRecord make_record(std::string cwe, std::string commit, int vul, std::string message) {
    corpus::VulnRecord r;
    r.cwe_id = std::move(cwe);
    r.code_link = "https://example.org/repo/commit/" + commit;
    r.commit_id = std::move(commit);
    r.commit_message = std::move(message);
    r.func_before = "int f(char *buf, int n) {\n  buf[n] = 0;\n  return n;\n}";
    r.func_after = "int f(char *buf, int n) {\n  if (n < 0) return -1;\n  buf[n] = 0;\n  return n;\n}";
    r.lang = "C";
    r.project = "demo";
    r.vul = vul;
    return r;
}

corpus::VulnRecord golden_record() {
    auto r = make_record("CWE-119", "a1", 1, "net: check skb length before copy");
    r.func_before = "int copy(char *dst, const char *src, int n) {\n  memcpy(dst, src, n);\n  return 0;\n}";
    r.func_after =
        "int copy(char *dst, const char *src, int n) {\n  if (n > MAX_LEN) return -EINVAL;\n  memcpy(dst, src, n);\n  return 0;\n}";
    r.project = "linux";
    r.lang = "C";
    return r;
}

std::string marker_for(std::size_t index) { return fmt::format("[rec-{:06d}]", index); }

std::vector<corpus::VulnRecord> synthetic_corpus(const std::vector<std::string>& cwes,
                                                 std::size_t per_cwe, std::uint64_t seed) {
    static const char* const kVerbs[] = {"fix", "check", "validate", "guard", "clamp", "harden"};
    static const char* const kNouns[] = {"length", "pointer", "index", "buffer", "permission", "handle"};
    std::mt19937_64 rng(seed);
    std::vector<corpus::VulnRecord> out;
    std::size_t index = 0;
    for (const auto& cwe : cwes) {
        for (std::size_t i = 0; i < per_cwe; ++i, ++index) {
            const int vul = i % 2 == 0 ? 1 : 0;
            const auto verb = kVerbs[rng() % std::size(kVerbs)];
            const auto noun = kNouns[rng() % std::size(kNouns)];
            auto r = make_record(cwe, fmt::format("{:040x}", rng() ^ (index << 20)), vul,
                                 fmt::format("{} {} {} in parser", marker_for(index), verb, noun));
            r.func_before = fmt::format("static int op_{}(struct ctx *c, size_t {}) {{\n  return c->{}[{}];\n}}",
                                        index, noun, noun, noun);
            r.func_after = fmt::format("static int op_{}(struct ctx *c, size_t {}) {{\n  if ({} >= c->len) return -1;\n  return c->{}[{}];\n}}",
                                       index, noun, noun, noun, noun);
            r.project = index % 3 == 0 ? "linux" : (index % 3 == 1 ? "openssl" : "ffmpeg");
            if (index % 4 == 0) r.cve_id = fmt::format("CVE-2015-{:04d}", index);
            out.push_back(std::move(r));
        }
    }
    return out;
}

void write_knowledge_dir(const fs::path& dir, const std::vector<std::string>& cwes) {
    static const char* const kBodies[] = {
        "Improper restriction of operations within the bounds of a memory buffer. The software "
        "reads from or writes to a memory location outside the intended boundary of the buffer.",
        "Resource management errors. The software does not release or incorrectly releases a "
        "resource, leading to exhaustion, leaks or use after free.",
        "Permissions, privileges and access controls. The software does not enforce the intended "
        "privilege boundaries when handling a request.",
        "Improper input validation. The product receives input but does not validate that the "
        "input has the properties required to process it safely.",
        "Exposure of sensitive information to an unauthorized actor through error messages, "
        "uninitialised memory or debug output.",
    };
    fs::create_directories(dir);
    for (std::size_t i = 0; i < cwes.size(); ++i) {
        std::string body;
        for (int rep = 0; rep < 40; ++rep) {
            body += fmt::format("{} {} Example {} for {}. ", cwes[i], kBodies[i % std::size(kBodies)], rep, cwes[i]);
            if (rep == 19) body += "\f";
        }
        write_file(dir / (cwes[i] + ".txt"), body);
    }
}

std::map<std::string, std::map<std::string, ScriptedAnswer>> script_answers(
    const std::vector<corpus::VulnRecord>& records, const std::vector<std::string>& strategies,
    std::uint64_t seed) {
    std::map<std::string, std::map<std::string, ScriptedAnswer>> out;
    std::mt19937_64 rng(seed);
    auto draw = [&](int truth) {
        const auto roll = rng() % 100;
        if (roll < 5) return llm::Label::unparseable;
        const bool correct = roll < 75;
        const bool vulnerable = correct ? truth == 1 : truth == 0;
        return vulnerable ? llm::Label::vulnerable : llm::Label::not_vulnerable;
    };
    for (const auto& s : strategies) {
        auto& m = out[s];
        for (const auto& r : records) {
            ScriptedAnswer a;
            a.detector = draw(r.vul);
            if (s == "dual") a.validator = draw(r.vul);
            m[r.record_id()] = a;
        }
    }
    return out;
}

std::string response_text(llm::Label label, const std::string& why) {
    switch (label) {
        case llm::Label::vulnerable: return "Vulnerable. " + why;
        case llm::Label::not_vulnerable: return "Not Vulnerable - " + why;
        case llm::Label::unparseable: break;
    }
    return "I am unable to reach a conclusion about this change.";
}

std::string mock_script(const std::vector<corpus::VulnRecord>& records,
                        const std::map<std::string, ScriptedAnswer>& answers, bool dual) {
    nlohmann::ordered_json rules = nlohmann::ordered_json::array();
    std::map<std::string, std::string> marker_by_id;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& msg = records[i].commit_message;
        marker_by_id[records[i].record_id()] = msg.substr(0, msg.find(']') + 1);
    }
    if (dual) {
        for (const auto& r : records) {
            const auto& a = answers.at(r.record_id());
            rules.push_back({{"contains", nlohmann::ordered_json::array({marker_by_id[r.record_id()], "audit and validation agent"})},
                             {"response", response_text(a.validator, "the audit reached this view.")}});
        }
    }
    for (const auto& r : records) {
        const auto& a = answers.at(r.record_id());
        rules.push_back({{"contains", nlohmann::ordered_json::array({marker_by_id[r.record_id()]})},
                         {"response", response_text(a.detector, "the bounds check changes behaviour.")}});
    }
    nlohmann::ordered_json script;
    script["rules"] = std::move(rules);
    return script.dump(1);
}

}  // namespace vulnllm::testing
