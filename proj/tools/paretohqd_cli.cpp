// paretohqd: command-line front end for the curation toolkit.
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "paretohqd/config.hpp"
#include "paretohqd/dataset_io.hpp"
#include "paretohqd/metrics.hpp"
#include "paretohqd/pareto.hpp"
#include "paretohqd/pipeline.hpp"
#include "paretohqd/rng.hpp"
#include "paretohqd/selection.hpp"
#include "paretohqd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace paretohqd;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    const auto path = dir / ".lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open lock file '" + path.string() + "'");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error("output directory '" + dir.string() + "' is in use by another process");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

CliConfig load(const Globals& g) {
  CliConfig c = g.config.empty() ? config_from_json(json::object(), fs::current_path(), process_env())
                                 : load_config(g.config, process_env());
  if (g.seed) c.plan_blocks["seed"] = *g.seed;
  if (!g.out.empty()) c.out_dir = g.out;
  if (g.verbose) c.verbose = true;
  return c;
}

fs::path require_out(const CliConfig& c) {
  if (c.out_dir.empty()) throw UsageError("an output directory is required (--out or output.dir)");
  return c.out_dir;
}

std::vector<std::string> objective_names(const CliConfig& c, std::size_t fallback) {
  if (c.plan_blocks.contains("dataset")) {
    const auto& d = c.plan_blocks["dataset"];
    if (d.contains("objectives")) return d["objectives"].get<std::vector<std::string>>();
    if (d.contains("objective_count")) {
      return Dataset::with_objectives(d["objective_count"].get<std::size_t>()).objective_names();
    }
  }
  return Dataset::with_objectives(fallback).objective_names();
}

// Dataset from --input, else from the config's dataset path or world.
Dataset input_dataset(const CliConfig& c, const std::string& input, std::size_t m) {
  if (!input.empty()) return read_dataset_file(input, objective_names(c, m));
  const PipelinePlan plan = c.plan();
  return load_source_dataset(plan);
}

std::string join(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%s%.6g", i ? ", " : "", v[i]);
    s += buf;
  }
  return "[" + s + "]";
}

void print_bounds(const RewardBounds& b) {
  std::cout << "bounds min " << join(b.min.values()) << " max " << join(b.max.values()) << "\n";
}

// --- score -----------------------------------------------------------------

int cmd_score(const Globals& g, const std::string& input, const std::string& output,
              std::size_t m, bool rescore) {
  CliConfig c = load(g);
  json blocks = c.plan_blocks;
  const auto scorer_block =
      blocks.contains("pipeline") && blocks["pipeline"].contains("scorer")
          ? blocks["pipeline"]["scorer"]
          : json();
  const bool toy_default = blocks.contains("world") && scorer_block.is_null();
  if (scorer_block.is_null() && !toy_default) {
    throw UsageError("no scorer endpoint configured (pipeline.scorer or PARETOHQD_SCORER_*)");
  }
  const AdapterEndpoint endpoint =
      scorer_block.is_null() ? AdapterEndpoint{} : endpoint_from_json(scorer_block);
  if (endpoint.mode == AdapterMode::kNone && !toy_default) {
    throw UsageError("no scorer endpoint configured (pipeline.scorer or PARETOHQD_SCORER_*)");
  }

  // Resolve the scorer through a plan that names this input.
  fs::path in_path = input;
  if (in_path.empty()) {
    if (!blocks.contains("dataset") || !blocks["dataset"].contains("path")) {
      throw UsageError("no input dataset (--input or dataset.path)");
    }
    in_path = blocks["dataset"]["path"].get<std::string>();
    if (in_path.is_relative()) in_path = c.base_dir / in_path;
  }
  PipelinePlan plan;
  plan.objective_names = objective_names(c, m);
  plan.scorer = endpoint;
  if (blocks.contains("world")) plan.world = synthetic::world_spec_from_json(blocks["world"]);
  const AdapterSet adapters = make_adapters(plan);
  if (!adapters.scorer) throw UsageError("no scorer endpoint configured");

  const Dataset d = read_dataset_file(in_path, plan.objective_names);
  fs::path out_path = output;
  if (out_path.empty()) out_path = require_out(c) / "scored.jsonl";
  const fs::path lock_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  DirLock lock(lock_dir);

  ScoreOptions opts;
  opts.batch = batch_options(endpoint);
  opts.rescore = rescore;
  opts.partial_path = fs::path(out_path.string() + ".partial.jsonl");
  const Dataset scored = score_dataset(d, adapters.scorer, opts);
  write_dataset_file(out_path, scored);
  std::cout << "scored " << scored.size() << " examples -> " << out_path.string() << "\n";
  print_bounds(compute_bounds(scored));
  return 0;
}

// --- curate ----------------------------------------------------------------

int cmd_curate(const Globals& g, const std::string& stage) {
  if (stage != "1" && stage != "2" && stage != "both") {
    throw UsageError("--stage must be 1, 2 or both");
  }
  const CliConfig c = load(g);
  const fs::path out = require_out(c);
  const PipelinePlan plan = c.plan();
  DirLock lock(out);
  RunContext ctx;
  ctx.adapters = make_adapters(plan);
  RunRecord record;
  if (stage == "1" || stage == "both") record = run_stage1(plan, out, ctx);
  if (stage == "2" || stage == "both") record = run_stage2(plan, out, ctx);
  std::cout << summarize_run(record);
  if (c.verbose) {
    for (const auto& [channel, n] : record.adapter_calls) {
      std::cerr << "adapter calls " << channel << ": " << n << "\n";
    }
    if (fs::exists(out / "timings.json")) std::cerr << read_file(out / "timings.json");
  }
  return 0;
}

// --- evaluate --------------------------------------------------------------

std::vector<EvaluationPoint> read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open points file '" + path.string() + "'");
  std::vector<EvaluationPoint> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      points.push_back({PreferenceVector::normalized(j.at("preference").get<std::vector<double>>()),
                        RewardVector(j.at("mean_rewards").get<std::vector<double>>())});
    } catch (const std::exception& e) {
      throw DataError("bad evaluation point at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return points;
}

std::vector<std::string> read_responses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open responses file '" + path.string() + "'");
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).at("response").get<std::string>());
    } catch (const std::exception& e) {
      throw DataError("bad response record at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

int cmd_evaluate(const Globals& g, const std::string& points_file,
                 const std::string& responses_file, const std::string& bounds_file,
                 const std::vector<double>& hv_reference, std::size_t mc_samples) {
  if (points_file.empty() && responses_file.empty()) {
    throw UsageError("evaluate needs --points and/or --responses");
  }
  const CliConfig c = load(g);
  const fs::path out = c.out_dir;
  std::optional<DirLock> lock;
  if (!out.empty()) lock.emplace(out);
  json summary;
  int status = 0;

  if (!points_file.empty()) {
    const auto points = read_points(points_file);
    if (points.empty()) throw DataError("no evaluation points in '" + points_file + "'");
    std::vector<RewardVector> raw;
    for (const auto& p : points) raw.push_back(p.mean_rewards);
    const RewardBounds b = bounds_file.empty()
                               ? compute_bounds(raw)
                               : bounds_from_json(json::parse(read_file(bounds_file)));
    HvReference ref;
    if (!hv_reference.empty()) {
      ref.raw = RewardVector(hv_reference);
    } else if (c.metrics.hv_reference) {
      ref.raw = RewardVector(*c.metrics.hv_reference);
    }
    const FrontReport report = summarize_front(points, b, ref);
    const auto names = objective_names(c, b.size());
    summary["points"] = points.size();
    summary["hypervolume"] = report.hypervolume;
    std::size_t dominated = 0;
    for (const auto& r : report.rows) dominated += r.dominated;
    summary["dominated"] = dominated;

    const std::size_t samples = mc_samples ? mc_samples : c.metrics.monte_carlo_samples;
    if (samples > 0) {
      std::vector<RewardVector> norm;
      for (const auto& r : report.rows) norm.push_back(r.normalized);
      const RewardVector ref_norm =
          ref.raw ? normalize(*ref.raw, b) : RewardVector(std::vector<double>(b.size(), 0.0));
      const std::uint64_t seed =
          derive_seed(c.plan_blocks.value("seed", std::uint64_t{0}), "hv-monte-carlo");
      const double mc = hypervolume_monte_carlo(norm, ref_norm, samples, seed);
      const bool ok = std::abs(mc - report.hypervolume) <= 0.01;
      summary["hypervolume_monte_carlo"] = mc;
      summary["cross_check"] = ok ? "ok" : "mismatch";
      if (!ok) status = 1;
    }
    if (!out.empty()) {
      std::ostringstream report_csv;
      write_front_report_csv(report_csv, report, names);
      write_file_atomic(out / "front_report.csv", report_csv.str());
      std::ostringstream plot_csv;
      write_front_plot_csv(plot_csv, report, names);
      write_file_atomic(out / "front_plot.csv", plot_csv.str());
    }
  }

  if (!responses_file.empty()) {
    const auto responses = read_responses(responses_file);
    if (responses.empty()) throw DataError("no responses in '" + responses_file + "'");
    std::string verdicts;
    std::size_t collapsed = 0;
    for (const auto& r : responses) {
      const CollapseVerdict v = detect_collapse(r);
      collapsed += v.collapsed;
      json j;
      j["collapsed"] = v.collapsed;
      j["reason"] = to_string(v.reason);
      if (v.trigger_phrase) j["phrase"] = *v.trigger_phrase;
      j["words"] = v.word_count;
      verdicts += j.dump() + "\n";
    }
    summary["responses"] = responses.size();
    summary["collapsed"] = collapsed;
    summary["collapse_rate"] = collapse_rate(responses);
    if (!out.empty()) write_file_atomic(out / "collapse.jsonl", verdicts);
  }

  if (!out.empty()) write_file_atomic(out / "evaluation.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return status;
}

// --- synth -----------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& shape, std::optional<std::size_t> size,
              std::optional<double> sigma, const std::string& profile) {
  CliConfig c = load(g);
  json& world = c.plan_blocks["world"];
  if (!shape.empty()) world["shape"] = shape;
  if (size) world["size"] = *size;
  if (sigma) world["sigma"] = *sigma;
  if (!profile.empty()) world["profile"] = profile;
  if (c.plan_blocks.contains("dataset") && c.plan_blocks["dataset"].contains("path")) {
    throw UsageError("synth uses a world; drop dataset.path from the config");
  }
  const PipelinePlan plan = c.plan();
  const fs::path out = require_out(c);
  DirLock lock(out);

  const Dataset d = synthetic::generate_world(*plan.world);
  const RewardBounds b = compute_bounds(d);
  const std::size_t n_p =
      plan.n_p_stage1.value_or(stage1_pareto_threshold(plan.preferences.size(), plan.k));
  const ParetoSubset hq = build_pareto_hq(d, n_p);

  std::string rows = "method,preference_index";
  for (std::size_t i = 0; i < 2; ++i) rows += ",w" + std::to_string(i + 1);
  rows += ",id,r1,r2,interior\n";
  std::string summary = "method,preference_index,w1,w2,selected,interior\n";
  std::size_t interior_total[2] = {0, 0};

  auto emit = [&](const std::string& method, std::size_t i, const PreferenceVector& w,
                  const Dataset& pool, const SelectionResult& sel, std::size_t slot) {
    std::size_t interior = 0;
    for (std::size_t idx : sel.pool_indices) {
      const auto& r = pool.rewards_at(idx);
      const bool in_band = synthetic::in_interior_band(r, b);
      interior += in_band;
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.6g,%.6g,%s,%.6f,%.6f,%d\n", method.c_str(), i,
                    w[0], w[1], pool[idx].id.c_str(), r[0], r[1], in_band ? 1 : 0);
      rows += buf;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6g,%.6g,%zu,%zu\n", method.c_str(), i, w[0], w[1],
                  sel.chosen.size(), interior);
    summary += buf;
    interior_total[slot] += interior;
  };

  for (std::size_t i = 0; i < plan.preferences.size(); ++i) {
    const auto& w = plan.preferences[i];
    emit("paretohqd", i, w, hq.data,
         select_stage1(hq.data, build_direction(w, b), plan.k, b, plan.normalized), 0);
    emit("ls_topk", i, w, d, select_ls_topk(d, w, plan.k, b, plan.normalized), 1);
  }

  write_dataset_file(out / "world.jsonl", d);
  write_file_atomic(out / "selections.csv", rows);
  write_file_atomic(out / "summary.csv", summary);
  std::cout << "world " << synthetic::to_string(plan.world->shape) << " ("
            << synthetic::to_string(plan.world->profile) << ", " << d.size() << " examples)\n"
            << "Pareto pool " << hq.data.size() << " examples from " << hq.layers_used
            << " layers\n"
            << "interior-band selections: paretohqd " << interior_total[0] << ", ls_topk "
            << interior_total[1] << "\n";
  return 0;
}

// --- replay / bounds / histogram -------------------------------------------

int cmd_replay(const Globals& g, const std::string& record_dir, const std::string& scratch_arg) {
  const CliConfig c = load(g);
  fs::path scratch = scratch_arg.empty() ? fs::path(c.out_dir) : fs::path(scratch_arg);
  bool temporary = false;
  if (scratch.empty()) {
    scratch = fs::temp_directory_path() / ("paretohqd-replay-" + std::to_string(::getpid()));
    temporary = true;
  }
  if (fs::absolute(scratch).lexically_normal() == fs::absolute(record_dir).lexically_normal()) {
    throw UsageError("replay scratch directory must differ from the record directory");
  }
  ReplayReport report;
  {
    DirLock lock(scratch);
    report = replay(record_dir, scratch);
  }
  if (temporary) fs::remove_all(scratch);
  if (report.identical) {
    std::cout << "identical (" << report.compared.size() << " artifacts)\n";
    return 0;
  }
  std::cout << "divergence: " << report.first_divergence << "\n";
  return 1;
}

int cmd_bounds(const Globals& g, const std::string& input, const std::string& output,
               const std::string& layers, std::size_t m) {
  const CliConfig c = load(g);
  const Dataset d = input_dataset(c, input, m);
  const RewardBounds b = compute_bounds(d);
  const std::string text = bounds_to_json(b).dump() + "\n";
  if (output.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(output, text);
  }
  if (!layers.empty()) {
    std::ostringstream os;
    write_layer_assignment(os, d, layer_fronts(d));
    write_file_atomic(layers, os.str());
  }
  return 0;
}

int cmd_histogram(const Globals& g, const std::string& input, const std::string& output,
                  std::optional<std::size_t> bins, std::size_t m) {
  const CliConfig c = load(g);
  const Dataset d = input_dataset(c, input, m);
  const RewardBounds b = compute_bounds(d);
  const Histogram h = imbalance_histogram(d, bins.value_or(c.metrics.bins), b);
  std::ostringstream os;
  write_histogram_csv(os, h, d.objective_names());
  if (output.empty()) {
    std::cout << os.str();
  } else {
    write_file_atomic(output, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pareto high-quality data curation for multiobjective alignment"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Top-level random seed");
  app.add_flag("--verbose", g.verbose, "Extra diagnostics on stderr");

  std::string input;
  std::string output;
  std::size_t objectives = 2;
  bool rescore = false;
  auto* score = app.add_subcommand("score", "Score a dataset through the configured scorer");
  score->add_option("--input", input, "Dataset file (defaults to dataset.path)");
  score->add_option("--output", output, "Scored dataset (defaults to <out>/scored.jsonl)");
  score->add_option("--objectives", objectives, "Objective count when not in the config");
  score->add_flag("--rescore", rescore, "Re-score examples that already have rewards");

  std::string stage = "both";
  auto* curate = app.add_subcommand("curate", "Run stage 1, stage 2 or both");
  curate->add_option("--stage", stage, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));

  std::string points;
  std::string responses;
  std::string bounds_file;
  std::vector<double> hv_reference;
  std::size_t mc_samples = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Hypervolume and collapse rate");
  evaluate->add_option("--points", points, "JSON lines of {preference, mean_rewards}");
  evaluate->add_option("--responses", responses, "JSON lines with a response field");
  evaluate->add_option("--bounds", bounds_file, "Bounds file used for normalization");
  evaluate->add_option("--hv-reference", hv_reference, "Raw-space reference point")
      ->delimiter(',');
  evaluate->add_option("--monte-carlo", mc_samples, "Monte Carlo samples for a HV cross-check");

  std::string shape;
  std::string profile;
  std::optional<std::size_t> size;
  std::optional<double> sigma;
  auto* synth = app.add_subcommand("synth", "Direction-based vs scalarized selection on a toy world");
  synth->add_option("--shape", shape, "convex_circle, concave_sqrt or linear");
  synth->add_option("--size", size, "Population size");
  synth->add_option("--sigma", sigma, "Inward noise scale");
  synth->add_option("--profile", profile, "uniform or center_heavy");

  std::string record_dir;
  std::string scratch;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded run from its adapter log");
  replay_cmd->add_option("--record", record_dir, "Run directory")->required();
  replay_cmd->add_option("--scratch", scratch, "Where to re-run (defaults to --out or a temp dir)");

  std::string layers;
  auto* bounds = app.add_subcommand("bounds", "Per-objective reward bounds");
  bounds->add_option("--input", input, "Scored dataset (defaults to the config source)");
  bounds->add_option("--output", output, "Write the bounds here instead of stdout");
  bounds->add_option("--layers", layers, "Also write the Pareto layer of every example");
  bounds->add_option("--objectives", objectives, "Objective count when not in the config");

  std::optional<std::size_t> bins;
  auto* histogram = app.add_subcommand("histogram", "Normalized reward histogram as CSV");
  histogram->add_option("--input", input, "Scored dataset (defaults to the config source)");
  histogram->add_option("--output", output, "CSV file instead of stdout");
  histogram->add_option("--bins", bins, "Bins per axis")->check(CLI::PositiveNumber);
  histogram->add_option("--objectives", objectives, "Objective count when not in the config");

  // Global flags are accepted after the subcommand as well.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*score) return cmd_score(g, input, output, objectives, rescore);
    if (*curate) return cmd_curate(g, stage);
    if (*evaluate) return cmd_evaluate(g, points, responses, bounds_file, hv_reference, mc_samples);
    if (*synth) return cmd_synth(g, shape, size, sigma, profile);
    if (*replay_cmd) return cmd_replay(g, record_dir, scratch);
    if (*bounds) return cmd_bounds(g, input, output, layers, objectives);
    if (*histogram) return cmd_histogram(g, input, output, bins, objectives);
  } catch (const UsageError& e) {
    std::cerr << "paretohqd: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "paretohqd: config error: " << e.what() << "\n";
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "paretohqd: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "paretohqd: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
