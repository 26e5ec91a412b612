#include "vulnllm/corpus.hpp"
#include "vulnllm/error.hpp"

#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>
#include <sstream>

using namespace vulnllm;
using corpus::Format;
using corpus::VulnRecord;
using testing::make_record;

namespace {

std::string jsonl_row(const nlohmann::json& overrides = {}) {
    nlohmann::json row = {{"CWE ID", "CWE-119"}, {"codeLink", "https://x/c"}, {"commit_id", "c"},
                          {"commit_message", "m"}, {"func_after", "b"}, {"func_before", "a"},
                          {"lang", "C"}, {"project", "p"}, {"vul", 1}};
    for (const auto& [k, v] : overrides.items()) {
        if (v.is_null()) {
            row.erase(k);
        } else {
            row[k] = v;
        }
    }
    return row.dump() + "\n";
}

}  // namespace

TEST_CASE("one JSONL row with all fields round-trips") {
    const auto records = corpus::parse_records(jsonl_row(), Format::jsonl);
    REQUIRE(records.size() == 1);
    const auto& r = records[0];
    CHECK(r.cwe_id == "CWE-119");
    CHECK(r.code_link == "https://x/c");
    CHECK(r.commit_id == "c");
    CHECK(r.vul == 1);
    CHECK_FALSE(r.cve_id.has_value());
    CHECK(corpus::parse_records(corpus::serialize_records(records, Format::jsonl), Format::jsonl) == records);
}

TEST_CASE("labels must be 0 or 1") {
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"vul", "2"}}), Format::jsonl), BadLabel);
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"vul", 2}}), Format::jsonl), BadLabel);
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"vul", "yes"}}), Format::jsonl), BadLabel);
    CHECK(corpus::parse_records(jsonl_row({{"vul", "0"}}), Format::jsonl)[0].vul == 0);
}

TEST_CASE("missing and malformed fields") {
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"commit_id", nullptr}}), Format::jsonl), MissingField);
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"func_before", ""}}), Format::jsonl), MalformedRow);
    CHECK_THROWS_AS(corpus::parse_records(jsonl_row({{"CWE ID", "119"}}), Format::jsonl), MalformedRow);
    CHECK_THROWS_AS(corpus::parse_records("{not json\n", Format::jsonl), MalformedRow);
    CHECK_THROWS_AS(corpus::parse_records("CWE ID,codeLink\nCWE-1,x\n", Format::csv), MissingField);
}

TEST_CASE("snake_case aliases are accepted") {
    nlohmann::json row = {{"cwe_id", "CWE-20"}, {"code_link", "l"}, {"commit_id", "c"},
                          {"commit_message", "m"}, {"func_after", "b"}, {"func_before", "a"},
                          {"lang", "C"}, {"project", "p"}, {"vul", 0}, {"cve_id", "CVE-1-2"}};
    const auto r = corpus::parse_records(row.dump(), Format::jsonl).at(0);
    CHECK(r.cwe_id == "CWE-20");
    CHECK(r.code_link == "l");
    CHECK(r.cve_id == "CVE-1-2");
}

TEST_CASE("10-row fixture matches an independent JSON reading") {
    const auto path = testing::source_dir() / "fixtures" / "corpus_10.jsonl";
    const auto records = corpus::read_records(path.string());
    REQUIRE(records.size() == 10);

    std::multiset<std::string> expected, got;
    std::istringstream in(testing::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const auto vul = j["vul"].is_string() ? j["vul"].get<std::string>() : std::to_string(j["vul"].get<int>());
        expected.insert(j["CWE ID"].get<std::string>() + "|" + j["codeLink"].get<std::string>() + "|" +
                        j["commit_id"].get<std::string>() + "|" + j["commit_message"].get<std::string>() +
                        "|" + j["func_after"].get<std::string>() + "|" + j["func_before"].get<std::string>() +
                        "|" + j["lang"].get<std::string>() + "|" + j["project"].get<std::string>() + "|" +
                        vul + "|" + j.value("CVE ID", std::string("-")));
    }
    for (const auto& r : records) {
        got.insert(r.cwe_id + "|" + r.code_link + "|" + r.commit_id + "|" + r.commit_message + "|" +
                   r.func_after + "|" + r.func_before + "|" + r.lang + "|" + r.project + "|" +
                   std::to_string(r.vul) + "|" + r.cve_id.value_or("-"));
    }
    CHECK(got == expected);
}

TEST_CASE("CSV fixture with quoting and multi-line fields") {
    const auto path = testing::source_dir() / "fixtures" / "corpus_3.csv";
    const auto records = corpus::read_records(path.string());
    REQUIRE(records.size() == 3);
    CHECK(records[0].commit_message == "net: check skb length, then copy");
    CHECK(records[0].func_after == "int f(int n) {\n  if (n > 8) return -1;\n  return n;\n}");
    CHECK(records[0].cve_id == "CVE-2014-0001");
    CHECK(records[1].commit_message == "say \"hello\"");
    CHECK_FALSE(records[1].cve_id.has_value());
    CHECK(records[2].vul == 1);
}

TEST_CASE("serialization round-trips in both formats") {
    std::mt19937_64 rng(11);
    const std::string alphabet = "ab,\"\n\r\t {}:\\xyz\x7f";
    auto random_text = [&](std::size_t min_len) {
        std::string s;
        const auto len = min_len + rng() % 20;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        return s;
    };
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<VulnRecord> records;
        for (int i = 0; i < 5; ++i) {
            auto r = make_record("CWE-" + std::to_string(rng() % 1000), random_text(1), static_cast<int>(rng() % 2),
                                 random_text(0));
            r.func_before = random_text(1);
            r.func_after = random_text(1);
            r.project = random_text(0);
            if (rng() % 2) r.cve_id = "CVE-2020-" + std::to_string(rng() % 10000);
            records.push_back(r);
        }
        for (auto fmt : {Format::csv, Format::jsonl}) {
            const auto text = corpus::serialize_records(records, fmt);
            CHECK(corpus::parse_records(text, fmt) == records);
        }
    }
}

TEST_CASE("format from path") {
    CHECK(corpus::format_from_path("a/b.csv") == Format::csv);
    CHECK(corpus::format_from_path("b.jsonl") == Format::jsonl);
    CHECK_THROWS_AS(corpus::format_from_path("b.txt"), UsageError);
}

TEST_CASE("deduplicate keeps the first record per commit and CWE") {
    std::vector<VulnRecord> records = {make_record("CWE-1", "a", 1, "first"), make_record("CWE-1", "a", 0, "second"),
                                       make_record("CWE-2", "a", 1)};
    const auto d = corpus::deduplicate(records);
    CHECK(d.dropped == 1);
    REQUIRE(d.records.size() == 2);
    CHECK(d.records[0].commit_message == "first");
}

namespace {

std::vector<VulnRecord> pool(const std::vector<std::string>& cwes, std::size_t per_label) {
    std::vector<VulnRecord> out;
    for (const auto& cwe : cwes) {
        for (int label = 0; label <= 1; ++label) {
            for (std::size_t i = 0; i < per_label; ++i) {
                out.push_back(make_record(cwe, cwe + "-" + std::to_string(label) + "-" + std::to_string(i), label));
            }
        }
    }
    return out;
}

const std::vector<std::string> kCwes = {"CWE-119", "CWE-399", "CWE-264", "CWE-20", "CWE-200"};

}  // namespace

TEST_CASE("5000/1000 split gives 500/500 train and 100/100 test per CWE") {
    const auto records = pool(kCwes, 600);
    const auto split = corpus::balance_split(records, {kCwes.begin(), kCwes.end()}, 5000, 1000, 3);
    CHECK(split.train.size() == 5000);
    CHECK(split.test.size() == 1000);
    for (const auto& cwe : kCwes) {
        const auto& c = split.per_cwe_counts.at(cwe);
        CHECK(c.train.vulnerable == 500);
        CHECK(c.train.non_vulnerable == 500);
        CHECK(c.test.vulnerable == 100);
        CHECK(c.test.non_vulnerable == 100);
    }
}

TEST_CASE("zero totals give empty splits") {
    const auto split = corpus::balance_split(pool(kCwes, 2), {kCwes.begin(), kCwes.end()}, 0, 0, 1);
    CHECK(split.train.empty());
    CHECK(split.test.empty());
}

TEST_CASE("40-record pool recounted by brute force") {
    std::vector<std::string> cwes = {"CWE-119", "CWE-399", "CWE-264", "CWE-20", "CWE-200"};
    const auto records = pool(cwes, 4);
    REQUIRE(records.size() == 40);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto split = corpus::balance_split(records, {cwes.begin(), cwes.end()}, 20, 10, seed);
        for (const auto& cwe : cwes) {
            for (int label = 0; label <= 1; ++label) {
                std::size_t train = 0, test = 0;
                for (const auto& r : split.train) train += r.cwe_id == cwe && r.vul == label;
                for (const auto& r : split.test) test += r.cwe_id == cwe && r.vul == label;
                CHECK(train == 2);
                CHECK(test == 1);
            }
        }
        std::set<std::string> train_commits;
        for (const auto& r : split.train) train_commits.insert(r.commit_id);
        for (const auto& r : split.test) CHECK(train_commits.count(r.commit_id) == 0);
    }
}

TEST_CASE("split is disjoint by commit even when commits span CWEs") {
    std::vector<VulnRecord> records;
    for (int i = 0; i < 30; ++i) {
        const auto commit = "shared-" + std::to_string(i);
        records.push_back(make_record("CWE-1", commit, i % 2));
        records.push_back(make_record("CWE-2", commit, i % 2));
    }
    const auto split = corpus::balance_split(records, {"CWE-1", "CWE-2"}, 8, 4, 5);
    std::set<std::string> test_commits;
    for (const auto& r : split.test) test_commits.insert(r.commit_id);
    for (const auto& r : split.train) CHECK(test_commits.count(r.commit_id) == 0);
}

TEST_CASE("split is deterministic and seed-sensitive") {
    const auto records = pool(kCwes, 30);
    const std::set<std::string> cwes(kCwes.begin(), kCwes.end());
    const auto a = corpus::balance_split(records, cwes, 200, 100, 9);
    const auto b = corpus::balance_split(records, cwes, 200, 100, 9);
    const auto c = corpus::balance_split(records, cwes, 200, 100, 10);
    CHECK(corpus::serialize_records(a.train, Format::jsonl) == corpus::serialize_records(b.train, Format::jsonl));
    CHECK(corpus::serialize_records(a.test, Format::jsonl) == corpus::serialize_records(b.test, Format::jsonl));
    CHECK(corpus::serialize_records(a.test, Format::jsonl) != corpus::serialize_records(c.test, Format::jsonl));
}

TEST_CASE("split errors") {
    const auto records = pool(kCwes, 3);
    const std::set<std::string> cwes(kCwes.begin(), kCwes.end());
    CHECK_THROWS_AS(corpus::balance_split(records, cwes, 15, 0, 1), IndivisibleTotal);
    try {
        corpus::balance_split(records, cwes, 40, 10, 1);
        FAIL("expected InsufficientSamples");
    } catch (const InsufficientSamples& e) {
        REQUIRE(e.shortfalls().size() == 10);
        CHECK(e.shortfalls()[0].needed == 5);
        CHECK(e.shortfalls()[0].available == 3);
    }
}

TEST_CASE("SFT export") {
    auto vul = make_record("CWE-20", "a", 1);
    auto safe = make_record("CWE-20", "b", 0);
    const auto triples = corpus::export_sft({vul, safe, make_record("CWE-399", "c", 1)}, "Classify the change.");
    REQUIRE(triples.size() == 3);
    CHECK(triples[0].output == "Vulnerable");
    CHECK(triples[1].output == "Not Vulnerable");
    CHECK(triples[0].instruction == "Classify the change.");
    CHECK(triples[0].input.find("CVE ID (if available): N/A") != std::string::npos);
    CHECK_THROWS_AS(corpus::export_sft({vul}, ""), UsageError);

    std::ostringstream out;
    corpus::write_sft_jsonl(out, triples);
    std::istringstream in(out.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        const auto j = nlohmann::json::parse(line);
        CHECK(j.size() == 3);
        CHECK(j.at("instruction").is_string());
        CHECK(j.at("input").is_string());
        CHECK(j.at("output").is_string());
    }
    CHECK(lines == 3);
}
