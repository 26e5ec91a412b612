#include "vulnllm/corpus.hpp"

#include "vulnllm/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace vulnllm {

namespace {

std::string describe_shortfalls(const std::vector<Shortfall>& shortfalls) {
    std::string msg = "insufficient samples:";
    for (const auto& s : shortfalls) {
        msg += " [" + s.cwe + " vul=" + std::to_string(s.label) + " needed " +
               std::to_string(s.needed) + ", available " + std::to_string(s.available) + "]";
    }
    return msg;
}

}  // namespace

InsufficientSamples::InsufficientSamples(std::vector<Shortfall> shortfalls)
    : DataError(describe_shortfalls(shortfalls)), shortfalls_(std::move(shortfalls)) {}

}  // namespace vulnllm

namespace vulnllm::corpus {

namespace {

using ordered_json = nlohmann::ordered_json;

enum class Field {
    cwe_id,
    code_link,
    commit_id,
    commit_message,
    func_after,
    func_before,
    lang,
    project,
    vul,
    cve_id,
};

constexpr std::size_t kFieldCount = 10;

constexpr std::array<std::string_view, kFieldCount> kCanonicalNames = {
    "CWE ID",      "codeLink", "commit_id", "commit_message", "func_after",
    "func_before", "lang",     "project",   "vul",            "CVE ID",
};

std::optional<Field> field_for_column(std::string_view name) {
    static const std::unordered_map<std::string_view, Field> table = {
        {"CWE ID", Field::cwe_id},
        {"cwe_id", Field::cwe_id},
        {"codeLink", Field::code_link},
        {"code_link", Field::code_link},
        {"commit_id", Field::commit_id},
        {"commit_message", Field::commit_message},
        {"func_after", Field::func_after},
        {"func_before", Field::func_before},
        {"lang", Field::lang},
        {"project", Field::project},
        {"vul", Field::vul},
        {"CVE ID", Field::cve_id},
        {"cve_id", Field::cve_id},
    };
    auto it = table.find(name);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

int parse_label(std::size_t row, std::string_view raw) {
    const auto v = trim(raw);
    if (v == "0") return 0;
    if (v == "1") return 1;
    throw BadLabel(row, std::string(raw));
}

/// Field values collected for one row before validation.
using RawRow = std::array<std::optional<std::string>, kFieldCount>;

VulnRecord build_record(std::size_t row, RawRow&& raw, const std::optional<int>& label) {
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        if (static_cast<Field>(i) == Field::cve_id) continue;
        if (!raw[i]) throw MissingField(row, std::string(kCanonicalNames[i]));
    }
    auto take = [&](Field f) { return std::move(*raw[static_cast<std::size_t>(f)]); };

    VulnRecord r;
    r.cwe_id = std::string(trim(take(Field::cwe_id)));
    r.code_link = take(Field::code_link);
    r.commit_id = take(Field::commit_id);
    r.commit_message = take(Field::commit_message);
    r.func_after = take(Field::func_after);
    r.func_before = take(Field::func_before);
    r.lang = take(Field::lang);
    r.project = take(Field::project);
    r.vul = label ? *label : parse_label(row, *raw[static_cast<std::size_t>(Field::vul)]);
    if (auto& cve = raw[static_cast<std::size_t>(Field::cve_id)]; cve && !trim(*cve).empty()) {
        r.cve_id = std::string(trim(*cve));
    }

    static const std::regex cwe_pattern("CWE-[0-9]+");
    if (!r.cwe_id.empty() && !std::regex_match(r.cwe_id, cwe_pattern)) {
        throw MalformedRow(row, "CWE ID '" + r.cwe_id + "' does not match CWE-<digits>");
    }
    if (r.func_before.empty()) throw MalformedRow(row, "func_before is empty");
    if (r.func_after.empty()) throw MalformedRow(row, "func_after is empty");
    return r;
}

// RFC-4180 reader. Quoted fields may span lines; "" inside quotes is a literal quote.
std::vector<std::vector<std::string>> read_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;  // distinguishes an empty trailing field from no row
    std::size_t i = 0;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field.push_back(c);
            }
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) {
                    throw MalformedRow(rows.size(), "stray quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw MalformedRow(rows.size(), "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::vector<VulnRecord> parse_csv(std::string_view text) {
    auto rows = read_csv_rows(text);
    std::vector<VulnRecord> out;
    if (rows.empty()) return out;

    const auto& header = rows.front();
    std::array<std::optional<std::size_t>, kFieldCount> column_of;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (auto f = field_for_column(trim(header[c]))) {
            auto& slot = column_of[static_cast<std::size_t>(*f)];
            if (!slot) slot = c;
        }
    }
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        if (static_cast<Field>(i) == Field::cve_id) continue;
        if (!column_of[i]) throw MissingField(0, std::string(kCanonicalNames[i]));
    }

    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& cells = rows[r];
        if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
        if (cells.size() != header.size()) {
            throw MalformedRow(r, "expected " + std::to_string(header.size()) + " columns, got " +
                                      std::to_string(cells.size()));
        }
        RawRow raw;
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            if (column_of[i]) raw[i] = std::move(cells[*column_of[i]]);
        }
        out.push_back(build_record(r, std::move(raw), std::nullopt));
    }
    return out;
}

std::vector<VulnRecord> parse_jsonl(std::string_view text) {
    std::vector<VulnRecord> out;
    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        ++row;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw MalformedRow(row, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) throw MalformedRow(row, "line is not a JSON object");

        RawRow raw;
        std::optional<int> label;
        for (const auto& [key, value] : obj.items()) {
            const auto f = field_for_column(key);
            if (!f) continue;
            const auto idx = static_cast<std::size_t>(*f);
            if (raw[idx]) continue;
            if (*f == Field::vul) {
                if (value.is_number_integer()) {
                    const auto v = value.get<long long>();
                    if (v != 0 && v != 1) throw BadLabel(row, value.dump());
                    label = static_cast<int>(v);
                    raw[idx] = std::to_string(v);
                } else if (value.is_string()) {
                    label = parse_label(row, value.get<std::string>());
                    raw[idx] = value.get<std::string>();
                } else {
                    throw BadLabel(row, value.dump());
                }
                continue;
            }
            if (value.is_null()) {
                if (*f == Field::cve_id || *f == Field::cwe_id) raw[idx] = std::string();
                continue;
            }
            raw[idx] = value.is_string() ? value.get<std::string>() : value.dump();
        }
        out.push_back(build_record(row, std::move(raw), label));
        if (nl == text.size()) break;
    }
    return out;
}

std::string csv_quote(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Fisher-Yates over mt19937_64 with rejection sampling; unlike std::shuffle the
/// permutation is identical across standard library implementations.
template <typename T>
void stable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x = rng();
        while (x >= limit) x = rng();
        std::swap(v[i - 1], v[static_cast<std::size_t>(x % bound)]);
    }
}

}  // namespace

Format format_from_path(std::string_view path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() &&
               path.substr(path.size() - suffix.size()) == suffix;
    };
    if (ends_with(".csv")) return Format::csv;
    if (ends_with(".jsonl") || ends_with(".json")) return Format::jsonl;
    throw UsageError("cannot infer corpus format from '" + std::string(path) +
                     "' (expected .csv or .jsonl)");
}

std::vector<VulnRecord> parse_records(std::string_view text, Format format) {
    return format == Format::csv ? parse_csv(text) : parse_jsonl(text);
}

std::vector<VulnRecord> parse_records(std::istream& in, Format format) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_records(buf.str(), format);
}

std::vector<VulnRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    return parse_records(in, format_from_path(path));
}

void write_records(std::ostream& out, const std::vector<VulnRecord>& records, Format format) {
    if (format == Format::jsonl) {
        for (const auto& r : records) {
            ordered_json obj;
            obj["CWE ID"] = r.cwe_id;
            obj["codeLink"] = r.code_link;
            obj["commit_id"] = r.commit_id;
            obj["commit_message"] = r.commit_message;
            obj["func_after"] = r.func_after;
            obj["func_before"] = r.func_before;
            obj["lang"] = r.lang;
            obj["project"] = r.project;
            obj["vul"] = r.vul;
            if (r.cve_id) obj["CVE ID"] = *r.cve_id;
            out << obj.dump() << '\n';
        }
        return;
    }

    for (std::size_t i = 0; i < kFieldCount; ++i) {
        if (i) out << ',';
        out << kCanonicalNames[i];
    }
    out << "\r\n";
    for (const auto& r : records) {
        out << csv_quote(r.cwe_id) << ',' << csv_quote(r.code_link) << ','
            << csv_quote(r.commit_id) << ',' << csv_quote(r.commit_message) << ','
            << csv_quote(r.func_after) << ',' << csv_quote(r.func_before) << ','
            << csv_quote(r.lang) << ',' << csv_quote(r.project) << ',' << r.vul << ','
            << csv_quote(r.cve_id.value_or("")) << "\r\n";
    }
}

std::string serialize_records(const std::vector<VulnRecord>& records, Format format) {
    std::ostringstream out;
    write_records(out, records, format);
    return out.str();
}

DedupResult deduplicate(const std::vector<VulnRecord>& records) {
    DedupResult result;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (seen.insert(r.record_id()).second) {
            result.records.push_back(r);
        } else {
            ++result.dropped;
        }
    }
    return result;
}

CorpusSplit balance_split(const std::vector<VulnRecord>& records,
                          const std::set<std::string>& cwes, std::size_t train_total,
                          std::size_t test_total, std::uint64_t seed) {
    const std::size_t buckets = 2 * cwes.size();
    for (auto total : {train_total, test_total}) {
        if (total == 0) continue;
        if (buckets == 0 || total % buckets != 0) throw IndivisibleTotal(total, buckets);
    }
    const std::size_t train_per = buckets ? train_total / buckets : 0;
    const std::size_t test_per = buckets ? test_total / buckets : 0;

    auto dedup = deduplicate(records);
    CorpusSplit split;
    split.duplicates_dropped = dedup.dropped;

    // (cwe, label) -> indices into dedup.records; labels ordered vulnerable first.
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> pools;
    for (const auto& cwe : cwes) {
        pools[{cwe, 1}];
        pools[{cwe, 0}];
    }
    for (std::size_t i = 0; i < dedup.records.size(); ++i) {
        const auto& r = dedup.records[i];
        auto it = pools.find({r.cwe_id, r.vul});
        if (it != pools.end()) it->second.push_back(i);
    }

    std::vector<Shortfall> shortfalls;
    for (const auto& [key, pool] : pools) {
        if (pool.size() < train_per + test_per) {
            shortfalls.push_back({key.first, key.second, train_per + test_per, pool.size()});
        }
    }
    if (!shortfalls.empty()) throw InsufficientSamples(std::move(shortfalls));

    std::mt19937_64 rng(seed);
    for (auto& [key, pool] : pools) stable_shuffle(pool, rng);

    std::unordered_set<std::string> test_commits;
    std::vector<std::size_t> test_idx;
    for (auto& [key, pool] : pools) {
        std::size_t taken = 0;
        std::vector<std::size_t> rest;
        for (auto idx : pool) {
            if (taken < test_per) {
                test_idx.push_back(idx);
                test_commits.insert(dedup.records[idx].commit_id);
                ++taken;
            } else {
                rest.push_back(idx);
            }
        }
        pool = std::move(rest);
    }

    std::vector<std::size_t> train_idx;
    for (const auto& [key, pool] : pools) {
        std::size_t taken = 0;
        for (auto idx : pool) {
            if (taken == train_per) break;
            if (test_commits.count(dedup.records[idx].commit_id)) continue;
            train_idx.push_back(idx);
            ++taken;
        }
        if (taken < train_per) {
            const auto usable = static_cast<std::size_t>(std::count_if(
                pool.begin(), pool.end(),
                [&](std::size_t i) { return !test_commits.count(dedup.records[i].commit_id); }));
            shortfalls.push_back({key.first, key.second, train_per, usable});
        }
    }
    if (!shortfalls.empty()) throw InsufficientSamples(std::move(shortfalls));

    stable_shuffle(train_idx, rng);
    stable_shuffle(test_idx, rng);

    for (const auto& cwe : cwes) split.per_cwe_counts[cwe];
    for (auto idx : train_idx) {
        const auto& r = dedup.records[idx];
        auto& c = split.per_cwe_counts[r.cwe_id].train;
        (r.vul ? c.vulnerable : c.non_vulnerable)++;
        split.train.push_back(r);
    }
    for (auto idx : test_idx) {
        const auto& r = dedup.records[idx];
        auto& c = split.per_cwe_counts[r.cwe_id].test;
        (r.vul ? c.vulnerable : c.non_vulnerable)++;
        split.test.push_back(r);
    }
    return split;
}

std::string serialize_sft_input(const VulnRecord& r) {
    std::string out;
    out += "Commit Message: " + r.commit_message + "\n";
    out += "Code Before Change: " + r.func_before + "\n";
    out += "Code After Change: " + r.func_after + "\n";
    out += "CVE ID (if available): " + r.cve_id.value_or("N/A") + "\n";
    out += "CWE ID (if available): " + (r.cwe_id.empty() ? std::string("N/A") : r.cwe_id) + "\n";
    out += "Project: " + r.project + "\n";
    out += "Programming Language: " + r.lang;
    return out;
}

std::vector<SftTriple> export_sft(const std::vector<VulnRecord>& records,
                                  std::string_view instruction) {
    if (instruction.empty()) throw UsageError("SFT instruction must not be empty");
    std::vector<SftTriple> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back({std::string(instruction), serialize_sft_input(r),
                       std::string(r.vul ? kVulnerableLabel : kNotVulnerableLabel)});
    }
    return out;
}

void write_sft_jsonl(std::ostream& out, const std::vector<SftTriple>& triples) {
    for (const auto& t : triples) {
        ordered_json obj;
        obj["instruction"] = t.instruction;
        obj["input"] = t.input;
        obj["output"] = t.output;
        out << obj.dump() << '\n';
    }
}

}  // namespace vulnllm::corpus
