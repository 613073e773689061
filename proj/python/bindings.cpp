#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "paretohqd/config.hpp"
#include "paretohqd/geometry.hpp"
#include "paretohqd/metrics.hpp"
#include "paretohqd/pareto.hpp"
#include "paretohqd/pipeline.hpp"
#include "paretohqd/selection.hpp"
#include "paretohqd/synthetic.hpp"

namespace py = pybind11;
using namespace paretohqd;

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<RewardVector> to_vectors(const Matrix& rows) {
  std::vector<RewardVector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

// Points become a scored dataset with ids "0".."n-1".
Dataset to_dataset(const Matrix& rows) {
  if (rows.empty()) throw DataError("no points");
  Dataset d = Dataset::with_objectives(rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ScoredExample ex;
    ex.id = std::to_string(i);
    ex.rewards = RewardVector(rows[i]);
    d.add(std::move(ex));
  }
  return d;
}

RewardBounds bounds_or_computed(const Matrix& rows, const std::optional<std::vector<double>>& lo,
                                const std::optional<std::vector<double>>& hi) {
  if (lo.has_value() != hi.has_value()) throw DataError("give both bounds or neither");
  if (lo) return {RewardVector(*lo), RewardVector(*hi)};
  return compute_bounds(to_vectors(rows));
}

std::vector<double> values(const RewardVector& v) { return {v.begin(), v.end()}; }

py::tuple selection_tuple(const SelectionResult& r) {
  return py::make_tuple(r.pool_indices, r.scores);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pareto high-quality data selection primitives";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ArityError>(m, "ArityError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_RuntimeError);
  py::register_exception<AdapterError>(m, "AdapterError", PyExc_RuntimeError);

  m.def("dominates", [](const std::vector<double>& a, const std::vector<double>& b) {
    return dominates(RewardVector(a), RewardVector(b));
  });

  m.def(
      "layer_fronts",
      [](const Matrix& points) { return layer_fronts(to_vectors(points)).layers; },
      "Successive non-dominated fronts as lists of point indices.");

  m.def(
      "build_pareto_hq",
      [](const Matrix& points, std::size_t n_p) {
        const ParetoSubset s = build_pareto_hq(to_dataset(points), n_p);
        py::dict d;
        d["indices"] = s.source_indices;
        d["layers_used"] = s.layers_used;
        d["total_layers"] = s.total_layers;
        d["exhausted"] = s.exhausted;
        return d;
      },
      py::arg("points"), py::arg("n_p"));

  m.def("compute_bounds", [](const Matrix& points) {
    const RewardBounds b = compute_bounds(to_vectors(points));
    return py::make_tuple(values(b.min), values(b.max));
  });

  m.def("normalize", [](const std::vector<double>& v, const std::vector<double>& lo,
                        const std::vector<double>& hi) {
    return values(normalize(RewardVector(v), {RewardVector(lo), RewardVector(hi)}));
  });

  m.def("compromise_point", [](const std::vector<double>& w, const std::vector<double>& lo,
                               const std::vector<double>& hi) {
    return values(compromise_point(PreferenceVector(w), {RewardVector(lo), RewardVector(hi)}));
  });

  m.def(
      "distance_to_direction",
      [](const std::vector<double>& v, const std::vector<double>& w, const std::vector<double>& lo,
         const std::vector<double>& hi, bool normalized) {
        const RewardBounds b{RewardVector(lo), RewardVector(hi)};
        return distance_to_direction(RewardVector(v), build_direction(PreferenceVector(w), b), b,
                                     normalized);
      },
      py::arg("v"), py::arg("w"), py::arg("lo"), py::arg("hi"), py::arg("normalized") = true);

  m.def(
      "select_stage1",
      [](const Matrix& points, const std::vector<double>& w, std::size_t k,
         std::optional<std::vector<double>> lo, std::optional<std::vector<double>> hi,
         bool normalized) {
        const RewardBounds b = bounds_or_computed(points, lo, hi);
        return selection_tuple(select_stage1(to_dataset(points),
                                             build_direction(PreferenceVector(w), b), k, b,
                                             normalized));
      },
      py::arg("points"), py::arg("w"), py::arg("k"), py::arg("lo") = py::none(),
      py::arg("hi") = py::none(), py::arg("normalized") = true,
      "Indices and ray distances of the k points nearest the preference direction.");

  m.def(
      "select_stage2",
      [](const Matrix& points, const std::vector<double>& w, std::size_t k,
         std::optional<std::vector<double>> lo, std::optional<std::vector<double>> hi,
         bool normalized) {
        const RewardBounds b = bounds_or_computed(points, lo, hi);
        return selection_tuple(select_stage2(to_dataset(points),
                                             build_direction(PreferenceVector(w), b), k, b,
                                             normalized));
      },
      py::arg("points"), py::arg("w"), py::arg("k"), py::arg("lo") = py::none(),
      py::arg("hi") = py::none(), py::arg("normalized") = true);

  m.def(
      "select_ls_topk",
      [](const Matrix& points, const std::vector<double>& w, std::size_t k,
         std::optional<std::vector<double>> lo, std::optional<std::vector<double>> hi,
         bool normalized) {
        const RewardBounds b = bounds_or_computed(points, lo, hi);
        return selection_tuple(
            select_ls_topk(to_dataset(points), PreferenceVector(w), k, b, normalized));
      },
      py::arg("points"), py::arg("w"), py::arg("k"), py::arg("lo") = py::none(),
      py::arg("hi") = py::none(), py::arg("normalized") = true);

  m.def("representative_preferences", [](const Matrix& prefs, std::size_t m_obj) {
    std::vector<PreferenceVector> all;
    for (const auto& p : prefs) all.emplace_back(p);
    return representative_preferences(all, m_obj);
  });

  m.def("match_stage2_pool", [](const std::vector<double>& w, std::uint64_t seed) {
    const PoolMatch p = match_stage2_pool(PreferenceVector(w), seed);
    return py::make_tuple(p.pool, p.tie);
  });

  m.def("stage1_pareto_threshold", &stage1_pareto_threshold);
  m.def("stage2_pareto_threshold", &stage2_pareto_threshold);

  m.def("hypervolume", [](const Matrix& points, const std::vector<double>& ref) {
    return hypervolume(to_vectors(points), RewardVector(ref));
  });

  m.def("detect_collapse", [](const std::string& text) {
    const CollapseVerdict v = detect_collapse(text);
    py::dict d;
    d["collapsed"] = v.collapsed;
    d["reason"] = std::string(to_string(v.reason));
    d["phrase"] = v.trigger_phrase;
    d["words"] = v.word_count;
    return d;
  });

  m.def("collapse_rate", [](const std::vector<std::string>& responses) {
    return collapse_rate(responses);
  });

  m.def(
      "generate_world",
      [](const std::string& shape, std::size_t size, double sigma, const std::string& profile,
         std::uint64_t seed) {
        synthetic::WorldSpec spec;
        spec.shape = synthetic::front_shape_from_string(shape);
        spec.size = size;
        spec.sigma = sigma;
        spec.profile = synthetic::imbalance_profile_from_string(profile);
        spec.seed = seed;
        const Dataset d = synthetic::generate_world(spec);
        std::vector<std::string> ids;
        Matrix points;
        for (std::size_t i = 0; i < d.size(); ++i) {
          ids.push_back(d[i].id);
          points.push_back(values(d.rewards_at(i)));
        }
        return py::make_tuple(ids, points);
      },
      py::arg("shape") = "concave_sqrt", py::arg("size") = 2000, py::arg("sigma") = 0.02,
      py::arg("profile") = "uniform", py::arg("seed") = 0);

  m.def(
      "curate",
      [](const std::filesystem::path& config, const std::filesystem::path& out,
         const std::string& stage) {
        if (stage != "1" && stage != "2" && stage != "both") {
          throw ConfigError("stage must be '1', '2' or 'both'");
        }
        py::gil_scoped_release release;
        const PipelinePlan plan = load_config(config, process_env()).plan();
        RunContext ctx;
        ctx.adapters = make_adapters(plan);
        RunRecord record;
        if (stage != "2") record = run_stage1(plan, out, ctx);
        if (stage != "1") record = run_stage2(plan, out, ctx);
        return summarize_run(record);
      },
      py::arg("config"), py::arg("out"), py::arg("stage") = "both",
      "Runs the configured curation stages; returns the text summary.");

  m.def(
      "replay",
      [](const std::filesystem::path& record, const std::filesystem::path& scratch) {
        ReplayReport r;
        {
          py::gil_scoped_release release;
          r = replay(record, scratch);
        }
        return py::make_tuple(r.identical, r.first_divergence);
      },
      py::arg("record"), py::arg("scratch"));
}
