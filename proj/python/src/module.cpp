#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "acesearcher/cli.hpp"
#include "acesearcher/decomposition.hpp"
#include "acesearcher/evalkit.hpp"
#include "acesearcher/retrieval.hpp"
#include "acesearcher/reward.hpp"
#include "acesearcher/selfplay.hpp"
#include "acesearcher/theory.hpp"

namespace py = pybind11;
using namespace acesearcher;

namespace {

struct PyIndex {
  InvertedIndex index;
};

std::vector<Passage> to_passages(const std::vector<std::tuple<std::string, std::string, std::string>>& rows) {
  std::vector<Passage> out;
  out.reserve(rows.size());
  for (const auto& [id, title, body] : rows) out.push_back({id, title, body});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "C++ core of the acesearcher package";

  static py::exception<Error> error(m, "CoreError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  // text and scoring
  m.def("tokenize", [](const std::string& s) { return tokenize(s); });
  m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); });
  m.def("exact_match", [](const std::string& p, const std::vector<std::string>& g) { return exact_match(p, g); });
  m.def("token_f1", [](const std::string& p, const std::vector<std::string>& g) { return token_f1(p, g); });
  m.def("numeric_match", [](const std::string& p, const std::string& g, double tol) { return numeric_match(p, g, tol); },
        py::arg("prediction"), py::arg("gold"), py::arg("rel_tol") = 0.01);
  m.def(
      "compute_reward",
      [](const std::string& p, const std::vector<std::string>& g, bool format_ok, const std::string& task) {
        const auto r = compute_reward(p, g, format_ok, parse_task_kind(task));
        return py::dict(py::arg("em") = r.em, py::arg("format_ok") = r.format_ok, py::arg("reward") = r.reward);
      },
      py::arg("prediction"), py::arg("golds"), py::arg("format_ok"), py::arg("task") = "multihop_qa");

  // decomposition
  m.def(
      "parse_decomposition",
      [](const std::string& raw, int max_subquestions) { return parse_decomposition(raw, max_subquestions).templates; },
      py::arg("raw"), py::arg("max_subquestions") = 8);
  m.def("substitute_placeholders", [](const std::string& t, const std::vector<std::string>& answers) {
    return substitute_placeholders(t, answers);
  });

  // retrieval
  m.def(
      "allocate_budget",
      [](int N, int n, int max_subquestions) { return allocate_budget(N, n, max_subquestions).per_subquestion_k; },
      py::arg("N"), py::arg("n"), py::arg("max_subquestions") = 8);
  m.def("merge_contexts", [](const std::vector<std::vector<std::string>>& lists, std::size_t cap) {
    std::vector<std::vector<Passage>> docs;
    for (const auto& l : lists) {
      docs.emplace_back();
      for (const auto& id : l) docs.back().push_back({id, "", ""});
    }
    std::vector<std::string> ids;
    for (const auto& p : merge_contexts(docs, cap)) ids.push_back(p.id);
    return ids;
  }, py::arg("lists"), py::arg("cap") = static_cast<std::size_t>(-1));

  py::class_<PyIndex>(m, "Index")
      .def_static(
          "build",
          [](const std::vector<std::tuple<std::string, std::string, std::string>>& passages, double k1, double b) {
            return PyIndex{build_index(to_passages(passages), k1, b)};
          },
          py::arg("passages"), py::arg("k1") = 0.9, py::arg("b") = 0.4)
      .def_static("from_corpus", [](const std::filesystem::path& p, double k1, double b) {
            return PyIndex{build_index(load_corpus(p), k1, b)};
          }, py::arg("path"), py::arg("k1") = 0.9, py::arg("b") = 0.4)
      .def_static("load", [](const std::filesystem::path& p) { return PyIndex{InvertedIndex::load(p)}; })
      .def("save", [](const PyIndex& self, const std::filesystem::path& p) { self.index.save(p); })
      .def("search",
           [](const PyIndex& self, const std::string& query, std::size_t k) {
             std::vector<std::pair<std::string, double>> hits;
             for (const auto& h : self.index.search(query, k)) hits.emplace_back(h.passage->id, h.score);
             return hits;
           },
           py::arg("query"), py::arg("k") = 10)
      .def("__len__", [](const PyIndex& self) { return self.index.passages().size(); })
      .def_property_readonly("term_count", [](const PyIndex& self) { return self.index.term_count(); });

  // reports come back as JSON text; the Python layer decodes them
  m.def("theory_report", [](std::uint64_t seed) {
    theory::TheorySuiteOptions options;
    options.seed = seed;
    py::gil_scoped_release release;
    return theory::to_json(theory::run_theory_suite(options)).dump();
  }, py::arg("seed") = 0);
  m.def("evaluate_report", [](const std::filesystem::path& trajectories, const std::filesystem::path& dataset,
                              std::optional<int> k) {
    auto report = score_predictions(trajectories, dataset);
    if (k) {
      report.k = *k;
      report.recall_at_k = answer_recall_at_k(trajectories, dataset, *k);
    }
    return to_json(report).dump();
  }, py::arg("trajectories"), py::arg("dataset"), py::arg("k") = std::nullopt);
  m.def("preferences_from_trees", [](const std::vector<std::filesystem::path>& tree_files,
                                     const std::filesystem::path& out, int iteration) {
    std::vector<PreferenceDataset> datasets;
    for (const auto& f : tree_files)
      for (const auto& tree : load_rollout_trees(f)) datasets.push_back(build_preference_dataset(tree, iteration));
    export_preferences(out, datasets);
  }, py::arg("tree_files"), py::arg("out"), py::arg("iteration") = 0);

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "acesearcher");
    std::ostringstream out, err;
    int status;
    {
      py::gil_scoped_release release;
      status = dispatch(args, out, err);
    }
    return std::make_tuple(status, out.str(), err.str());
  });
}
