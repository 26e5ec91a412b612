#include "vulnllm/evaluation.hpp"

#include "vulnllm/error.hpp"
#include "vulnllm/stats.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vulnllm::eval {

namespace {

double ratio(std::size_t num, std::size_t den, bool& undefined) {
    if (den == 0) {
        undefined = true;
        return 0.0;
    }
    undefined = false;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    unparseable += o.unparseable;
    return *this;
}

ConfusionMatrix confusion(std::span<const llm::Label> predictions, std::span<const int> truths) {
    if (predictions.size() != truths.size()) throw LengthMismatch(predictions.size(), truths.size());
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int truth = truths[i];
        if (truth != 0 && truth != 1) {
            throw DataError("truth label at position " + std::to_string(i) + " is not 0 or 1");
        }
        switch (predictions[i]) {
            case llm::Label::vulnerable: (truth ? cm.tp : cm.fp)++; break;
            case llm::Label::not_vulnerable: (truth ? cm.fn : cm.tn)++; break;
            case llm::Label::unparseable:
                (truth ? cm.fn : cm.fp)++;
                ++cm.unparseable;
                break;
        }
    }
    return cm;
}

ConfusionMatrix confusion(std::span<const llm::Verdict> predictions, std::span<const int> truths) {
    std::vector<llm::Label> labels;
    labels.reserve(predictions.size());
    for (const auto& v : predictions) labels.push_back(v.label);
    return confusion(labels, truths);
}

MetricRow metrics(const ConfusionMatrix& cm, std::string name) {
    if (cm.total() == 0) throw EmptyMatrix();
    MetricRow row;
    row.name = std::move(name);
    bool unused = false;
    row.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
    row.precision = ratio(cm.tp, cm.tp + cm.fp, row.precision_undefined);
    row.recall = ratio(cm.tp, cm.tp + cm.fn, row.recall_undefined);
    const double pr = row.precision + row.recall;
    if (pr == 0.0) {
        row.f1 = 0.0;
        row.f1_undefined = true;
    } else {
        row.f1 = 2.0 * row.precision * row.recall / pr;
    }
    return row;
}

MetricRow macro_average(std::span<const MetricRow> rows) {
    if (rows.empty()) throw EmptyRows();
    MetricRow avg;
    avg.name = std::string(kAverageRowName);
    for (const auto& r : rows) {
        avg.accuracy += r.accuracy;
        avg.precision += r.precision;
        avg.recall += r.recall;
        avg.f1 += r.f1;
    }
    const auto n = static_cast<double>(rows.size());
    avg.accuracy /= n;
    avg.precision /= n;
    avg.recall /= n;
    avg.f1 /= n;
    return avg;
}

double round2(double value) {
    // The 1e-9 nudge keeps binary representations of x.xx5 rounding up.
    return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0;
}

std::string format2(double value) { return fmt::format("{:.2f}", round2(value)); }

PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                                double confidence) {
    if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
    if (a.size() < 2) throw DataError("paired t-test needs at least two pairs");
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("confidence must be in (0, 1)");

    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];

    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0 || sd <= 1e-13 * std::fabs(mean)) throw DegenerateDifferences();

    PairedTTestResult r;
    r.df = n - 1;
    r.mean_diff = mean;
    r.sd_diff = sd;
    r.confidence = confidence;
    const double se = sd / std::sqrt(static_cast<double>(n));
    r.t = mean / se;
    r.p = stats::student_t_two_sided_p(r.t, static_cast<double>(r.df));
    const double crit = stats::student_t_quantile((1.0 + confidence) / 2.0, static_cast<double>(r.df));
    r.ci_low = mean - crit * se;
    r.ci_high = mean + crit * se;
    return r;
}

AverageCheck check_printed_average(std::span<const double> printed_values, double printed_avg) {
    if (printed_values.empty()) throw EmptyRows();
    AverageCheck c;
    c.computed = std::accumulate(printed_values.begin(), printed_values.end(), 0.0) /
                 static_cast<double>(printed_values.size());
    c.printed = printed_avg;
    c.consistent = std::fabs(round2(c.computed) - printed_avg) < 1e-9;
    return c;
}

std::string display_name(std::string_view strategy) {
    if (strategy == "base") return "Base Model";
    if (strategy == "rag") return "RAG";
    if (strategy == "sft") return "SFT";
    if (strategy == "dual") return "Dual-Agent LLM";
    return std::string(strategy);
}

ReportArtifacts emit_report(const ReportInputs& in) {
    if (in.results.empty()) throw NoResults();

    ReportArtifacts out;
    auto& md = out.markdown;
    md += "# Vulnerability Detection Evaluation\n\n";
    md += fmt::format("- Run id: `{}`\n- Config hash: `{}`\n- Seed: {}\n\n", in.run_id,
                      in.config_hash, in.seed);

    out.csv = "run_id,config_hash,seed,strategy,cwe,tp,fp,fn,tn,unparseable,accuracy,precision,"
              "recall,f1\n";

    nlohmann::ordered_json chart;
    chart["run_id"] = in.run_id;
    chart["config_hash"] = in.config_hash;
    chart["seed"] = in.seed;
    chart["metric"] = "f1";
    chart["cwes"] = in.cwes;
    auto series = nlohmann::ordered_json::array();

    std::map<std::string, std::vector<double>> f1_by_strategy;

    for (const auto& res : in.results) {
        std::vector<MetricRow> rows;
        ConfusionMatrix all;
        for (const auto& cwe : in.cwes) {
            const auto it = res.per_cwe.find(cwe);
            const ConfusionMatrix cm = it == res.per_cwe.end() ? ConfusionMatrix{} : it->second;
            if (cm.total() == 0) {
                throw DataError("strategy '" + res.strategy + "' has no results for " + cwe);
            }
            rows.push_back(metrics(cm, cwe));
            all += cm;
            const auto& r = rows.back();
            out.csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                                   in.run_id, in.config_hash, in.seed, res.strategy, cwe, cm.tp,
                                   cm.fp, cm.fn, cm.tn, cm.unparseable, r.accuracy, r.precision,
                                   r.recall, r.f1);
        }
        const auto avg = macro_average(rows);
        out.csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                               in.run_id, in.config_hash, in.seed, res.strategy, kAverageRowName,
                               all.tp, all.fp, all.fn, all.tn, all.unparseable, avg.accuracy,
                               avg.precision, avg.recall, avg.f1);

        md += fmt::format("## Performance of {} Across All CWEs\n\n", display_name(res.strategy));
        md += "| CWE | Accuracy | Precision | Recall | F1 Score |\n";
        md += "|-----|----------|-----------|--------|----------|\n";
        std::vector<std::string> notes;
        for (const auto& r : rows) {
            md += fmt::format("| {} | {} | {} | {} | {} |\n", r.name, format2(r.accuracy),
                              format2(r.precision), format2(r.recall), format2(r.f1));
            if (r.precision_undefined) notes.push_back(r.name + ": precision undefined (no positive predictions), reported as 0");
            if (r.recall_undefined) notes.push_back(r.name + ": recall undefined (no positive samples), reported as 0");
        }
        md += fmt::format("| {} | {} | {} | {} | {} |\n\n", avg.name, format2(avg.accuracy),
                          format2(avg.precision), format2(avg.recall), format2(avg.f1));
        md += fmt::format("Unparseable responses: {} (counted as misclassifications)\n", all.unparseable);
        for (const auto& n : notes) md += "- " + n + "\n";
        md += "\n";

        std::vector<double> f1s;
        for (const auto& r : rows) f1s.push_back(r.f1);
        nlohmann::ordered_json s;
        s["strategy"] = res.strategy;
        s["label"] = display_name(res.strategy);
        s["f1"] = f1s;
        series.push_back(std::move(s));
        f1_by_strategy[res.strategy] = std::move(f1s);
    }
    chart["series"] = std::move(series);
    out.chart_json = chart.dump(2) + "\n";

    if (in.results.size() >= 2) {
        const auto base = f1_by_strategy.find(in.baseline);
        if (base == f1_by_strategy.end()) {
            throw UsageError("baseline strategy '" + in.baseline + "' is not among the results");
        }
        md += fmt::format("## Paired t-tests on F1 Score vs {}\n\n", display_name(in.baseline));
        md += "| Technique | t | df | p | 95% CI | Mean difference |\n";
        md += "|-----------|---|----|---|--------|-----------------|\n";
        std::vector<std::string> sentences;
        for (const auto& res : in.results) {
            if (res.strategy == in.baseline) continue;
            const auto& f1s = f1_by_strategy.at(res.strategy);
            const auto name = display_name(res.strategy);
            try {
                const auto t = paired_t_test(f1s, base->second);
                md += fmt::format("| {} | {:.2f} | {} | {:.4f} | [{:.4f}, {:.4f}] | {:.4f} |\n", name,
                                  t.t, t.df, t.p, t.ci_low, t.ci_high, t.mean_diff);
                sentences.push_back(fmt::format("{}: t({}) = {:.2f}, p = {:.4f}, 95% CI: [{:.4f}, {:.4f}]",
                                                name, t.df, t.t, t.p, t.ci_low, t.ci_high));
            } catch (const DegenerateDifferences&) {
                md += fmt::format("| {} | n/a | {} | n/a | n/a | n/a |\n", name, f1s.size() - 1);
                sentences.push_back(name + ": not computed (identical F1 differences across CWEs)");
            } catch (const DataError&) {
                md += fmt::format("| {} | n/a | n/a | n/a | n/a | n/a |\n", name);
                sentences.push_back(name + ": not computed (fewer than two CWEs)");
            }
        }
        md += "\n";
        for (const auto& s : sentences) md += "- " + s + "\n";
        md += "\n";
    }
    return out;
}

}  // namespace vulnllm::eval
