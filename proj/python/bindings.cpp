#include "vulnllm/cli.hpp"
#include "vulnllm/corpus.hpp"
#include "vulnllm/error.hpp"
#include "vulnllm/evaluation.hpp"
#include "vulnllm/knowledge.hpp"
#include "vulnllm/llm_gateway.hpp"
#include "vulnllm/strategies.hpp"
#include "vulnllm/vector_index.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace vulnllm;

namespace {

llm::Label label_arg(const std::string& s) { return llm::label_from_string(s); }
std::string label_str(llm::Label l) { return std::string(llm::to_string(l)); }

}  // namespace

PYBIND11_MODULE(_vulnllm, m) {
    m.doc() = "Native core of vulnllm";

    static py::exception<Error> error(m, "Error");
    static py::exception<UsageError> usage_error(m, "UsageError", error.ptr());
    static py::exception<DataError> data_error(m, "DataError", error.ptr());
    static py::exception<BackendError> backend_error(m, "BackendError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const UsageError& e) {
            py::set_error(usage_error, e.what());
        } catch (const DataError& e) {
            py::set_error(data_error, e.what());
        } catch (const BackendError& e) {
            py::set_error(backend_error, e.what());
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<corpus::VulnRecord>(m, "VulnRecord")
        .def(py::init<>())
        .def_readwrite("cwe_id", &corpus::VulnRecord::cwe_id)
        .def_readwrite("code_link", &corpus::VulnRecord::code_link)
        .def_readwrite("commit_id", &corpus::VulnRecord::commit_id)
        .def_readwrite("commit_message", &corpus::VulnRecord::commit_message)
        .def_readwrite("func_before", &corpus::VulnRecord::func_before)
        .def_readwrite("func_after", &corpus::VulnRecord::func_after)
        .def_readwrite("lang", &corpus::VulnRecord::lang)
        .def_readwrite("project", &corpus::VulnRecord::project)
        .def_readwrite("vul", &corpus::VulnRecord::vul)
        .def_readwrite("cve_id", &corpus::VulnRecord::cve_id)
        .def_property_readonly("record_id", &corpus::VulnRecord::record_id);

    m.def("read_records", &corpus::read_records, py::arg("path"));

    py::class_<eval::ConfusionMatrix>(m, "ConfusionMatrix")
        .def(py::init([](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
                 return eval::ConfusionMatrix{tp, fp, fn, tn};
             }),
             py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"))
        .def_readwrite("tp", &eval::ConfusionMatrix::tp)
        .def_readwrite("fp", &eval::ConfusionMatrix::fp)
        .def_readwrite("fn", &eval::ConfusionMatrix::fn)
        .def_readwrite("tn", &eval::ConfusionMatrix::tn)
        .def_readonly("unparseable", &eval::ConfusionMatrix::unparseable);

    py::class_<eval::MetricRow>(m, "MetricRow")
        .def_readonly("name", &eval::MetricRow::name)
        .def_readonly("accuracy", &eval::MetricRow::accuracy)
        .def_readonly("precision", &eval::MetricRow::precision)
        .def_readonly("recall", &eval::MetricRow::recall)
        .def_readonly("f1", &eval::MetricRow::f1)
        .def_readonly("precision_undefined", &eval::MetricRow::precision_undefined)
        .def_readonly("recall_undefined", &eval::MetricRow::recall_undefined)
        .def_readonly("f1_undefined", &eval::MetricRow::f1_undefined);

    m.def("confusion",
          [](const std::vector<std::string>& predictions, const std::vector<int>& truths) {
              std::vector<llm::Label> labels;
              for (const auto& p : predictions) labels.push_back(label_arg(p));
              return eval::confusion(labels, truths);
          },
          py::arg("predictions"), py::arg("truths"));
    m.def("metrics", &eval::metrics, py::arg("cm"), py::arg("name") = std::string());
    m.def("macro_average", [](const std::vector<eval::MetricRow>& rows) { return eval::macro_average(rows); });
    m.def("round2", &eval::round2);

    py::class_<eval::PairedTTestResult>(m, "PairedTTestResult")
        .def_readonly("t", &eval::PairedTTestResult::t)
        .def_readonly("df", &eval::PairedTTestResult::df)
        .def_readonly("p", &eval::PairedTTestResult::p)
        .def_readonly("ci_low", &eval::PairedTTestResult::ci_low)
        .def_readonly("ci_high", &eval::PairedTTestResult::ci_high)
        .def_readonly("mean_diff", &eval::PairedTTestResult::mean_diff)
        .def_readonly("sd_diff", &eval::PairedTTestResult::sd_diff)
        .def_readonly("confidence", &eval::PairedTTestResult::confidence);
    m.def("paired_t_test",
          [](const std::vector<double>& a, const std::vector<double>& b, double confidence) {
              return eval::paired_t_test(a, b, confidence);
          },
          py::arg("a"), py::arg("b"), py::arg("confidence") = 0.95);

    py::class_<eval::AverageCheck>(m, "AverageCheck")
        .def_readonly("computed", &eval::AverageCheck::computed)
        .def_readonly("printed", &eval::AverageCheck::printed)
        .def_readonly("consistent", &eval::AverageCheck::consistent);
    m.def("check_printed_average",
          [](const std::vector<double>& values, double printed) { return eval::check_printed_average(values, printed); },
          py::arg("values"), py::arg("printed"));

    py::class_<knowledge::KnowledgeChunk>(m, "KnowledgeChunk")
        .def_readonly("doc_id", &knowledge::KnowledgeChunk::doc_id)
        .def_readonly("ordinal", &knowledge::KnowledgeChunk::ordinal)
        .def_readonly("token_start", &knowledge::KnowledgeChunk::token_start)
        .def_readonly("token_end", &knowledge::KnowledgeChunk::token_end)
        .def_readonly("text", &knowledge::KnowledgeChunk::text);
    m.def("clean_text", [](const py::bytes& raw) { return knowledge::clean_text(std::string(raw)); });
    m.def("clean_text", [](const std::string& raw) { return knowledge::clean_text(raw); });
    m.def("tokenize", [](const std::string& text) { return knowledge::tokenize(text); });
    m.def("chunk",
          [](const std::vector<std::string>& tokens, std::size_t chunk_size, std::size_t chunk_overlap,
             const std::string& doc_id) { return knowledge::chunk(tokens, {chunk_size, chunk_overlap}, doc_id); },
          py::arg("tokens"), py::arg("chunk_size") = 512, py::arg("chunk_overlap") = 32, py::arg("doc_id") = "");

    m.def("embed",
          [](const std::string& text, std::size_t dim) { return index::DeterministicEmbedder(dim).embed(text); },
          py::arg("text"), py::arg("dim") = 256);

    py::class_<llm::Verdict>(m, "Verdict")
        .def_property_readonly("label", [](const llm::Verdict& v) { return label_str(v.label); })
        .def_readonly("reasoning", &llm::Verdict::reasoning)
        .def_readonly("raw", &llm::Verdict::raw);
    m.def("parse_verdict", [](const std::string& raw) { return llm::parse_verdict(raw); });

    m.def("render_classification_prompt",
          [](const corpus::VulnRecord& record, const std::string& context, bool blank_cwe) {
              const auto p = strategies::render_classification_prompt(record, context, {blank_cwe});
              return py::make_tuple(p.system, p.user);
          },
          py::arg("record"), py::arg("context") = "", py::arg("blank_cwe") = false);
    m.def("build_rag_query", &strategies::build_rag_query);
    m.def("arbitrate",
          [](const std::string& detector, const std::string& validator) {
              const auto [final_label, revised] = strategies::arbitrate(label_arg(detector), label_arg(validator));
              return py::make_tuple(label_str(final_label), revised);
          },
          py::arg("detector"), py::arg("validator"));

    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::ostringstream out, err;
              int code = 0;
              {
                  py::gil_scoped_release release;
                  code = cli::run(args, out, err);
              }
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"), "Runs one CLI invocation; returns (exit_code, stdout, stderr).");
}
