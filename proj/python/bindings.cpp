// Python bindings: action grammar, two-sample tests, mock-shop ranking and
// the config-driven pipeline. Structured values cross as JSON documents.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "agentab/agent.hpp"
#include "agentab/analysis.hpp"
#include "agentab/mock_shop.hpp"
#include "agentab/pipeline.hpp"

namespace py = pybind11;
using namespace agentab;

namespace {

py::object ToPy(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
Json FromPy(const py::object& o) { return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

py::dict TestDict(const TestResult& r) {
  py::dict d;
  d["test_kind"] = std::string(ToString(r.kind));
  d["statistic"] = r.statistic;
  d["df"] = r.df;
  d["p_value"] = r.p_value;
  d["absolute_diff"] = r.effect.absolute_diff;
  d["relative_diff"] = r.effect.relative_diff ? py::cast(*r.effect.relative_diff) : py::none();
  d["standardized"] = r.effect.standardized;
  return d;
}

std::shared_ptr<const Catalog> LoadCatalog(const std::string& path) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const Catalog>> cache;
  std::lock_guard lock(mu);
  auto& c = cache[path];
  if (!c) c = std::make_shared<const Catalog>(Catalog::Load(path));
  return c;
}

py::dict Pipeline(const std::string& config, std::optional<std::string> output_dir, std::optional<int> parallelism) {
  ExperimentConfig cfg = LoadConfig(config);
  if (output_dir) cfg.output_dir = *output_dir;
  if (parallelism) cfg.parallelism = *parallelism;
  AnalyzeResult r;
  {
    py::gil_scoped_release release;
    StagePersonas(cfg);
    StageAllocate(cfg);
    StageRun(cfg, nullptr);
    r = StageAnalyze(cfg, nullptr);
  }
  py::dict d;
  d["report_json"] = r.report_json.string();
  d["report_text"] = r.report_text.string();
  d["sessions_csv"] = r.sessions_csv.string();
  d["sessions"] = r.sessions;
  d["abandoned"] = r.abandoned;
  d["abandoned_over_threshold"] = r.abandoned_over_threshold;
  return d;
}

}  // namespace

PYBIND11_MODULE(_agentab, m) {
  m.doc() = "agentab core bindings";
  m.attr("__version__") = std::string(kToolVersion);

  // ValidationError and its subclasses surface as ValueError.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ActionParseError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const SchemaError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "parse_action",
      [](const std::string& text) -> py::object {
        auto p = FindAction(text);
        if (!p) return py::none();
        return ToPy(ToJson(p->action));
      },
      py::arg("text"), "First action in the text as a dict, or None.");
  m.def(
      "serialize_action", [](const py::object& a) { return Serialize(ActionFromJson(FromPy(a))); }, py::arg("action"),
      "Canonical text form of an action dict.");

  m.def(
      "two_sample_t",
      [](const std::vector<double>& a, const std::vector<double>& b, bool welch) {
        return TestDict(TwoSampleT(a, b, welch ? TMode::kWelch : TMode::kPooled));
      },
      py::arg("a"), py::arg("b"), py::arg("welch") = false);
  m.def(
      "chi_square_2x2",
      [](long long as, long long af, long long bs, long long bf) { return TestDict(ChiSquare2x2(as, af, bs, bf)); },
      py::arg("a_success"), py::arg("a_fail"), py::arg("b_success"), py::arg("b_fail"));

  m.def(
      "search",
      [](const std::string& catalog, const std::string& query) {
        std::vector<std::string> ids;
        for (const Product* p : SearchRank(*LoadCatalog(catalog), query)) ids.push_back(p->id);
        return ids;
      },
      py::arg("catalog"), py::arg("query"), "Ranked product ids for the query.");
  m.def(
      "filter_options",
      [](const std::string& catalog, const std::string& query, std::optional<double> threshold) {
        const auto c = LoadCatalog(catalog);
        const VariantConfig v = threshold ? VariantConfig::Reduced(*threshold) : VariantConfig::Full();
        std::vector<std::pair<std::string, std::vector<std::string>>> out;
        for (const auto& g : BuildFilterGroups(SearchRank(*c, query), v, query)) {
          std::vector<std::string> values;
          for (const auto& o : g.options) values.push_back(o.value);
          out.emplace_back(g.name, std::move(values));
        }
        return out;
      },
      py::arg("catalog"), py::arg("query"), py::arg("threshold") = py::none(),
      "Filter panel as (group, values) pairs; a threshold selects the reduced panel.");

  m.def("run_pipeline", &Pipeline, py::arg("config"), py::arg("output_dir") = py::none(),
        py::arg("parallelism") = py::none(), "personas, allocate, run and analyze; returns artifact paths and counts.");
}
