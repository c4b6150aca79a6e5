#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "keyshap/analysis.hpp"
#include "keyshap/error.hpp"
#include "keyshap/gkr.hpp"
#include "keyshap/grouping.hpp"
#include "keyshap/io.hpp"
#include "keyshap/perturb.hpp"
#include "keyshap/shapley.hpp"
#include "keyshap/skeleton.hpp"

namespace py = pybind11;
using namespace keyshap;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const SquareMatrix& m) {
  Rows out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i].assign(m.row(i).begin(), m.row(i).end());
  return out;
}

SquareMatrix to_matrix(const Rows& rows) {
  SquareMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size())
      throw Error(ErrorKind::kDimensionMismatch, "matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Skeleton skeleton_from(const std::optional<std::string>& path) {
  return path ? load_schema_file(*path) : default_skeleton();
}

std::unique_ptr<CoalitionValueOracle> oracle_from(const std::string& spec, const KeypointSchema& schema,
                                                  int timeout_ms) {
  if (spec.starts_with("tabular:"))
    return std::make_unique<TabularOracle>(load_tabular_oracle(spec.substr(8), schema));
  if (spec.starts_with("synthetic:"))
    return make_synthetic_oracle(SyntheticModelConfig::from_json(read_text_file(spec.substr(10))), schema);
  if (spec.starts_with("external:"))
    return std::make_unique<ExternalOracle>(spec.substr(9), schema, timeout_ms);
  throw Error(ErrorKind::kConfig, "oracle spec must be tabular:PATH, synthetic:PATH or external:COMMAND");
}

}  // namespace

PYBIND11_MODULE(_keyshap, m) {
  m.doc() = "Group Shapley attribution for multi-keypoint predictors";

  py::exception<Error>(m, "KeyshapError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::module_::import("keyshap._keyshap").attr("KeyshapError");
      py::object inst = type(e.what());
      inst.attr("kind") = std::string(error_name(e.kind()));
      inst.attr("payload") = e.payload();
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  m.def("keypoint_names", [](std::optional<std::string> schema) { return skeleton_from(schema).schema().names(); },
        py::arg("schema") = py::none());
  m.def("keypoint_connectivity",
        [](std::optional<std::string> schema) { return to_rows(keypoint_connectivity(skeleton_from(schema))); },
        py::arg("schema") = py::none());
  m.def("perturbation_influence", [](const Rows& drops) { return to_rows(perturbation_influence(to_matrix(drops))); },
        py::arg("drops"));
  m.def(
      "load_delta_csv",
      [](const std::string& path, std::optional<std::string> schema) {
        const auto delta = align_to_schema(load_delta_csv(path), skeleton_from(schema).schema());
        py::dict d;
        d["names"] = delta.names;
        d["baseline"] = delta.baseline;
        d["drops"] = to_rows(delta.drops);
        return d;
      },
      py::arg("path"), py::arg("schema") = py::none());
  m.def("interdependency", [](const Rows& pi, const Rows& kc) {
    return to_rows(interdependency(to_matrix(pi), to_matrix(kc)));
  });
  m.def(
      "cluster",
      [](const Rows& s, std::size_t g, const std::string& linkage) {
        return cluster(to_matrix(s), g, parse_linkage(linkage)).groups();
      },
      py::arg("s"), py::arg("g") = 5, py::arg("linkage") = "single");

  m.def(
      "exact_shapley",
      [](const std::vector<double>& values) {
        std::size_t n = 0;
        while ((std::size_t{1} << n) < values.size()) ++n;
        if (values.empty() || (std::size_t{1} << n) != values.size())
          throw Error(ErrorKind::kIncompleteInput, "need 2^n coalition values indexed by bitmask");
        return exact_shapley(n, [&](std::uint64_t mask) { return values[mask]; });
      },
      py::arg("values"), "Shapley values of a game given as a table indexed by coalition bitmask.");
  m.def(
      "exact_shapley_fn",
      [](std::size_t n, const std::function<double(std::uint64_t)>& value) { return exact_shapley(n, value); },
      py::arg("n"), py::arg("value"));
  m.def("normalize_nonneg", [](const std::vector<double>& raw) { return normalize_nonneg(raw); });
  m.def(
      "query_count",
      [](const std::vector<std::size_t>& sizes, std::size_t n, std::uint64_t trials) {
        const auto q = query_count(grouping_from_sizes(sizes), n, trials);
        py::dict d;
        d["gsv"] = q.gsv.distinct_coalitions;
        d["exact"] = q.exact.distinct_coalitions;
        d["gsv_calls"] = q.gsv.oracle_calls;
        return d;
      },
      py::arg("sizes"), py::arg("n"), py::arg("trials") = 1);
  m.def(
      "run_gsv_json",
      [](const std::string& oracle, const std::string& groups_path, int trials, std::uint64_t seed, unsigned jobs,
         const std::string& split, std::optional<std::string> schema, int timeout_ms) {
        const auto sk = skeleton_from(schema);
        const auto o = oracle_from(oracle, sk.schema(), timeout_ms);
        const auto grouping = grouping_from_json(read_text_file(groups_path), sk.schema());
        GsvOptions opt;
        opt.trials = trials;
        opt.seed = seed;
        opt.jobs = jobs;
        opt.split = parse_split_mode(split);
        return report_to_json(run_gsv(*o, grouping, opt));
      },
      py::arg("oracle"), py::arg("groups"), py::arg("trials") = 1, py::arg("seed") = 0, py::arg("jobs") = 1,
      py::arg("split") = "uniform", py::arg("schema") = py::none(), py::arg("timeout_ms") = 30000,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "plan_gkr_jsonl",
      [](const std::string& annotations_path, const std::string& groups_path, double p, std::uint64_t seed,
         std::optional<std::vector<double>> scales, std::optional<std::string> schema) {
        const auto sk = skeleton_from(schema);
        const auto people = parse_annotations(read_text_file(annotations_path), sk.size());
        const auto grouping = grouping_from_json(read_text_file(groups_path), sk.schema());
        GkrConfig cfg;
        cfg.p = p;
        cfg.seed = seed;
        cfg.scales = scales ? *scales : default_gkr_scales(grouping, sk.schema());
        return plans_to_jsonl(plan_dataset(people, grouping, cfg));
      },
      py::arg("annotations"), py::arg("groups"), py::arg("p") = 0.5, py::arg("seed") = 0,
      py::arg("scales") = py::none(), py::arg("schema") = py::none());
  m.def(
      "confidence_correlation",
      [](const std::vector<std::string>& names, const std::vector<std::vector<std::optional<double>>>& rows) {
        const auto result = confidence_correlation(ConfidenceTable{names, rows});
        return py::make_tuple(to_rows(result.r), result.zero_variance_pairs);
      },
      py::arg("names"), py::arg("rows"));
  m.def(
      "render_heatmap",
      [](const Rows& matrix, const std::vector<std::string>& labels, std::optional<double> vmin,
         std::optional<double> vmax, const std::string& title, int decimals) {
        HeatmapOptions opt;
        opt.vmin = vmin;
        opt.vmax = vmax;
        opt.title = title;
        opt.decimals = decimals;
        return render_heatmap(to_matrix(matrix), labels, opt);
      },
      py::arg("matrix"), py::arg("labels"), py::arg("vmin") = py::none(), py::arg("vmax") = py::none(),
      py::arg("title") = "", py::arg("decimals") = 2);
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
  m.attr("__version__") = "0.3.0";
}
