#include "vulnllm/strategies.hpp"

#include "vulnllm/knowledge.hpp"
#include "prompt_templates.hpp"

#include <stdexcept>

namespace vulnllm::strategies {

namespace {

std::string or_na(std::string_view value) {
    return value.empty() ? std::string("N/A") : std::string(value);
}

std::string render_evidence(const corpus::VulnRecord& r, const PromptOptions& options) {
    return render_template(templates::evidence_v1,
                           {
                               {"commit_message", r.commit_message},
                               {"func_before", r.func_before},
                               {"func_after", r.func_after},
                               {"cve_id", or_na(r.cve_id.value_or(""))},
                               {"cwe_id", options.blank_cwe ? "N/A" : or_na(r.cwe_id)},
                               {"project", r.project},
                               {"lang", r.lang},
                           });
}

llm::ChatRequest make_request(const PromptBundle& p, const StrategyConfig& cfg) {
    return {p.system, p.user, cfg.temperature, cfg.max_tokens, cfg.model};
}

llm::LlmGateway& gateway_of(const StrategyConfig& cfg) {
    if (cfg.gateway == nullptr) throw UsageError("strategy config has no gateway");
    return *cfg.gateway;
}

/// Sends one prompt and appends the exchange to `det.calls`.
llm::Verdict ask(const PromptBundle& prompt, const StrategyConfig& cfg, std::string stage,
                 Detection& det) {
    const auto req = make_request(prompt, cfg);
    const auto completion = gateway_of(cfg).complete(req);
    det.calls.push_back({std::move(stage), completion.prompt_hash, req.system, req.user,
                         completion.text, completion.attempts});
    return llm::parse_verdict(completion.text);
}

}  // namespace

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        const auto name = tmpl.substr(open + 2, close - open - 2);
        const auto it = values.find(name);
        if (it == values.end()) {
            throw std::invalid_argument("template placeholder '" + std::string(name) +
                                        "' has no value");
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

PromptBundle render_classification_prompt(const corpus::VulnRecord& record,
                                          std::string_view context,
                                          const PromptOptions& options) {
    std::string knowledge;
    if (!context.empty()) {
        knowledge = "Relevant CWE knowledge:\n<<<\n" + std::string(context) + "\n>>>\n\n";
    }
    return {std::string(templates::classification_system_v1),
            render_template(templates::classification_user_v1,
                            {{"evidence", render_evidence(record, options)},
                             {"knowledge_section", std::move(knowledge)}})};
}

PromptBundle render_validator_prompt(const corpus::VulnRecord& record,
                                     const llm::Verdict& detector,
                                     const PromptOptions& options) {
    const bool parsed = detector.label != llm::Label::unparseable;
    return {std::string(templates::validator_system_v1),
            render_template(templates::validator_user_v1,
                            {
                                {"evidence", render_evidence(record, options)},
                                {"detector_label", std::string(llm::to_string(detector.label))},
                                {"detector_heading", parsed ? "Detector agent reasoning"
                                                            : "Detector agent raw response"},
                                {"detector_text", parsed ? detector.reasoning : detector.raw},
                            })};
}

std::string build_rag_query(const corpus::VulnRecord& record) {
    std::string query;
    auto append = [&](std::string_view part) {
        if (part.empty()) return;
        if (!query.empty()) query.push_back(' ');
        query.append(part);
    };
    append(record.cwe_id);
    append(knowledge::clean_text(record.commit_message));

    const auto tokens = knowledge::tokenize(record.func_before);
    std::string prefix;
    for (std::size_t i = 0; i < tokens.size() && i < kRagCodePrefixTokens; ++i) {
        if (i) prefix.push_back(' ');
        prefix += tokens[i];
    }
    append(prefix);
    return query;
}

std::string format_context(std::span<const index::RetrievalHit> hits) {
    std::string out;
    for (const auto& h : hits) {
        if (!out.empty()) out += "\n\n";
        out += "[" + h.id() + "]\n" + h.chunk.text;
    }
    return out;
}

std::pair<llm::Label, bool> arbitrate(llm::Label detector, llm::Label validator) noexcept {
    const auto final_label = validator != llm::Label::unparseable ? validator : detector;
    return {final_label, final_label != detector};
}

std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::base: return "base";
        case StrategyKind::rag: return "rag";
        case StrategyKind::sft: return "sft";
        case StrategyKind::dual: return "dual";
    }
    return "base";
}

StrategyKind strategy_from_string(std::string_view name) {
    if (name == "base") return StrategyKind::base;
    if (name == "rag") return StrategyKind::rag;
    if (name == "sft") return StrategyKind::sft;
    if (name == "dual") return StrategyKind::dual;
    throw UsageError("unknown strategy '" + std::string(name) + "' (base, rag, sft, dual)");
}

Detection detect_base(const corpus::VulnRecord& record, const StrategyConfig& cfg) {
    if (cfg.kind != StrategyKind::base && cfg.kind != StrategyKind::sft) {
        throw UsageError("detect_base requires a base or sft strategy config");
    }
    Detection det;
    det.strategy = cfg.kind;
    det.verdict = ask(render_classification_prompt(record, {}, cfg.prompt), cfg, "detector", det);
    return det;
}

Detection detect_rag(const corpus::VulnRecord& record, const StrategyConfig& cfg) {
    if (cfg.kind != StrategyKind::rag) throw UsageError("detect_rag requires a rag strategy config");
    if (cfg.retriever == nullptr) throw UsageError("rag strategy requires a knowledge index");

    Detection det;
    det.strategy = cfg.kind;
    const auto hits = cfg.retriever->retrieve(build_rag_query(record), cfg.k);
    const auto kept = index::rerank(hits, cfg.context_budget);
    for (const auto& h : hits) det.retrieved_ids.push_back(h.id());
    for (const auto& h : kept) det.context_ids.push_back(h.id());

    det.verdict = ask(render_classification_prompt(record, format_context(kept), cfg.prompt), cfg,
                      "detector", det);
    return det;
}

Detection detect_dual(const corpus::VulnRecord& record, const StrategyConfig& cfg) {
    if (cfg.kind != StrategyKind::dual) throw UsageError("detect_dual requires a dual strategy config");

    Detection det;
    det.strategy = cfg.kind;
    DualVerdict dual;
    dual.detector = ask(render_classification_prompt(record, {}, cfg.prompt), cfg, "detector", det);
    det.verdict = dual.detector;

    try {
        dual.validator =
            ask(render_validator_prompt(record, dual.detector, cfg.prompt), cfg, "validator", det);
    } catch (const Error& e) {
        dual.final_label = dual.detector.label;
        det.dual = dual;
        throw StageFailure(std::string("validator stage failed: ") + e.what(), std::move(det));
    }

    const auto [final_label, revised] = arbitrate(dual.detector.label, dual.validator.label);
    dual.final_label = final_label;
    dual.revised = revised;
    const auto& decider =
        dual.validator.label != llm::Label::unparseable ? dual.validator : dual.detector;
    det.verdict = {final_label, decider.reasoning, decider.raw};
    det.dual = std::move(dual);
    return det;
}

Detection detect(const corpus::VulnRecord& record, const StrategyConfig& cfg) {
    switch (cfg.kind) {
        case StrategyKind::base:
        case StrategyKind::sft: return detect_base(record, cfg);
        case StrategyKind::rag: return detect_rag(record, cfg);
        case StrategyKind::dual: return detect_dual(record, cfg);
    }
    throw UsageError("unknown strategy kind");
}

}  // namespace vulnllm::strategies
