// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "paretohqd/adapters.hpp"
#include "paretohqd/dataset_io.hpp"
#include "paretohqd/geometry.hpp"
#include "paretohqd/metrics.hpp"
#include "paretohqd/pareto.hpp"
#include "paretohqd/pipeline.hpp"
#include "paretohqd/selection.hpp"
#include "paretohqd/synthetic.hpp"

using namespace paretohqd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failing check of a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      first_failure_ = what;
    }
  }
  Outcome done(const std::string& summary) const {
    return {pass_, pass_ ? summary : first_failure_};
  }

 private:
  bool pass_ = true;
  std::string first_failure_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

Dataset dataset_of(const std::vector<oracle::Point>& rows) {
  Dataset d = Dataset::with_objectives(rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ScoredExample ex;
    ex.id = "x" + std::to_string(i);
    ex.rewards = RewardVector(rows[i]);
    d.add(std::move(ex));
  }
  return d;
}

std::vector<RewardVector> vectors_of(const std::vector<oracle::Point>& rows) {
  std::vector<RewardVector> out;
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome layering_oracle() {
  Checker c;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> grid(0, 6);
  std::size_t with_duplicates = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const std::size_t n = size(rng);
    std::vector<oracle::Point> rows;
    while (rows.size() < n) {
      // Coarse values on odd trials; explicit copies of earlier rows on all.
      if (!rows.empty() && u(rng) < 0.15) {
        rows.push_back(rows[std::uniform_int_distribution<std::size_t>(0, rows.size() - 1)(rng)]);
        continue;
      }
      oracle::Point p(m);
      for (auto& x : p) x = trial % 2 ? grid(rng) : u(rng);
      rows.push_back(p);
    }
    with_duplicates += std::set<oracle::Point>(rows.begin(), rows.end()).size() < rows.size();
    const ParetoLayering got = layer_fronts(dataset_of(rows));
    std::vector<std::set<std::size_t>> sets;
    for (const auto& layer : got.layers) sets.emplace_back(layer.begin(), layer.end());
    c.expect(sets == oracle::peel_layers(rows), "partition differs on trial " + std::to_string(trial));
  }
  const double secs = seconds_since(t0);
  c.expect(with_duplicates > 0, "no dataset contained duplicates");
  c.expect(secs < 5.0, "took " + fmt(secs) + " s");
  return c.done("200 datasets match the peeler (" + std::to_string(with_duplicates) +
                " with duplicates), " + fmt(secs) + " s");
}

// --- 2 ---------------------------------------------------------------------

Outcome compromise_law() {
  Checker c;
  const RewardBounds unit2{{0, 0}, {1, 1}};
  const RewardBounds unit3{{0, 0, 0}, {1, 1, 1}};
  std::mt19937_64 rng(202);
  for (int i = 0; i < 1000; ++i) {
    const auto w2 = oracle::random_simplex(2, rng);
    const auto w3 = oracle::random_simplex(3, rng);
    c.expect(compromise_point(PreferenceVector(w2), unit2) == RewardVector(w2), "W != w (M=2)");
    c.expect(compromise_point(PreferenceVector(w3), unit3) == RewardVector(w3), "W != w (M=3)");
  }

  std::uniform_real_distribution<double> box(-5, 5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto w = oracle::random_simplex(2, rng);
    const double lo0 = box(rng), lo1 = box(rng);
    const RewardBounds b{{lo0, lo1}, {lo0 + 0.1 + std::abs(box(rng)), lo1 + 0.1 + std::abs(box(rng))}};
    const RewardVector v = compromise_point(PreferenceVector(w), b);
    const double lhs = (b.max[0] - v[0]) / (b.max[1] - v[1]);
    const double rhs = (w[1] / w[0]) * ((b.max[0] - b.min[0]) / (b.max[1] - b.min[1]));
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  c.expect(worst <= 1e-12, "ratio identity off by " + sci(worst));

  std::vector<double> deviation_ratio;
  std::vector<double> weight_ratio;
  const RewardBounds b3{{-1, 0, 2}, {3, 1, 7}};
  for (int i = 0; i < 1000; ++i) {
    const auto w = oracle::random_simplex(3, rng);
    const RewardVector v = compromise_point(PreferenceVector(w), b3);
    deviation_ratio.push_back((b3.max[0] - v[0]) / (b3.max[1] - v[1]));
    weight_ratio.push_back(w[1] / w[0]);
  }
  const double r = oracle::pearson(deviation_ratio, weight_ratio);
  c.expect(r > 0, "M=3 correlation " + fmt(r));
  return c.done("W == w on the unit box, ratio error " + sci(worst) +
                ", M=3 correlation " + fmt(r));
}

// --- 3 ---------------------------------------------------------------------

Outcome distance_oracle() {
  Checker c;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(0, 1);
  std::uniform_real_distribution<double> wide(-1, 2);
  const RewardBounds raw3{{-100, -100, -100}, {100, 100, 100}};
  const RewardBounds raw2{{-100, -100}, {100, 100}};
  std::size_t clamped = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = 2 + i % 2;
    oracle::Point o(m), t(m), v(m);
    double len2 = 0.0;
    do {
      len2 = 0.0;
      for (std::size_t d = 0; d < m; ++d) {
        o[d] = unit(rng);
        t[d] = unit(rng);
        len2 += (t[d] - o[d]) * (t[d] - o[d]);
      }
    } while (len2 < 0.25);
    double along = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      v[d] = wide(rng);
      along += (v[d] - o[d]) * (t[d] - o[d]);
    }
    clamped += along < 0;
    const PreferenceDirection p{RewardVector(o), RewardVector(t),
                                PreferenceVector(std::vector<double>(m, 1.0 / m))};
    const double got = distance_to_direction(RewardVector(v), p, m == 2 ? raw2 : raw3, false);
    const double want = oracle::lambda_sweep(v, o, t, 20.0, 1000000);
    worst = std::max(worst, std::abs(got - want));
  }
  c.expect(worst < 1e-4, "max deviation " + sci(worst));
  c.expect(clamped > 0, "no clamped cases");
  return c.done("1000 cases, max deviation " + sci(worst) + ", " +
                std::to_string(clamped) + " clamped");
}

// --- 4 ---------------------------------------------------------------------

Outcome hypervolume_checks() {
  Checker c;
  const double two = hypervolume(vectors_of({{0.5, 1}, {1, 0.5}}), RewardVector{0, 0});
  c.expect(std::abs(two - 0.75) <= 1e-12, "2-D case gave " + std::to_string(two));
  c.expect(hypervolume(vectors_of({{1, 1}}), RewardVector{0, 0}) == 1.0, "unit box");

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_mc = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<oracle::Point> rows(15 + 5 * trial);
    for (auto& r : rows) r = {u(rng), u(rng), u(rng)};
    const double exact = hypervolume(vectors_of(rows), RewardVector{0, 0, 0});
    const double mc = oracle::monte_carlo_hv(rows, {0, 0, 0}, {1, 1, 1}, 1000000, 40 + trial);
    worst_mc = std::max(worst_mc, std::abs(exact - mc));
  }
  c.expect(worst_mc < 0.01, "3-D Monte Carlo gap " + fmt(worst_mc, 4));

  int monotone = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 2;
    std::vector<oracle::Point> rows(8, oracle::Point(m));
    for (auto& r : rows) {
      for (auto& x : r) x = u(rng);
    }
    const RewardVector ref(std::vector<double>(m, 0.0));
    const double before = hypervolume(vectors_of(rows), ref);
    oracle::Point extra(m);
    for (auto& x : extra) x = u(rng);
    rows.push_back(extra);
    monotone += hypervolume(vectors_of(rows), ref) >= before;
  }
  c.expect(monotone == 100, "monotone on " + std::to_string(monotone) + "/100");
  return c.done("2-D exact, 3-D Monte Carlo gap " + fmt(worst_mc, 4) + ", monotone 100/100");
}

// --- pipeline helpers --------------------------------------------------------

json toy_plan(std::uint64_t seed) {
  json j;
  j["world"] = {{"shape", "convex_circle"},
                {"size", 2000},
                {"sigma", 0.02},
                {"profile", "center_heavy"}};
  j["pipeline"] = {{"k", 100}, {"n_add", 2000}};
  j["seed"] = seed;
  return j;
}

RunRecord run_both(const PipelinePlan& plan, const fs::path& out) {
  RunContext ctx;
  ctx.adapters = make_adapters(plan);
  run_stage1(plan, out, ctx);
  return run_stage2(plan, out, ctx);
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

// --- 5 ---------------------------------------------------------------------

Outcome hyperparameter_arithmetic(const fs::path& run) {
  Checker c;
  std::size_t manifests = 0;
  for (int i = 0; i < 11; ++i) {
    char stem[16];
    std::snprintf(stem, sizeof(stem), "pref_%02d", i);
    const json s1 = read_json(run / "stage1" / (std::string(stem) + ".manifest.json"));
    const json s2 = read_json(run / "stage2" / (std::string(stem) + ".manifest.json"));
    c.expect(s1["n_p"] == 550, std::string(stem) + " stage-1 n_p " + s1["n_p"].dump());
    c.expect(s1["selected"] == 100, std::string(stem) + " stage-1 size " + s1["selected"].dump());
    c.expect(s2["selected"] == 50, std::string(stem) + " stage-2 size " + s2["selected"].dump());
    c.expect(s2["n_p"] == 275, std::string(stem) + " stage-2 n_p " + s2["n_p"].dump());
    manifests += 2;
  }
  return c.done(std::to_string(manifests) +
                " manifests: stage-1 n_p 550 / 100 chosen, stage-2 50 chosen");
}

// --- 6 ---------------------------------------------------------------------

Outcome collapse_fixtures() {
  Checker c;
  c.expect(detect_collapse(fixture::kShort).reason == CollapseReason::kTooShort, "short fixture");
  const auto rep = detect_collapse(fixture::kRepetitive);
  c.expect(rep.reason == CollapseReason::kRepetition, "repetitive fixture not flagged");
  c.expect(!detect_collapse(fixture::kFluent).collapsed, "fluent fixture flagged");

  const std::vector<std::string> vocab = {
      "the",   "model", "answer", "is",     "helpful", "and",    "clear",   "because", "it",
      "gives", "a",     "short",  "reason", "before",  "every",  "step",    "of",      "plan",
      "river", "stone", "light",  "green",  "window",  "quiet",  "music",   "number",  "table",
      "city",  "north", "summer", "paper",  "garden",  "bridge", "evening", "letter",  "road"};
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<std::size_t> base_len(5, vocab.size());
  std::uniform_int_distribution<std::size_t> phrase_len(2, 4);
  std::size_t misses = 0;
  std::size_t fluent = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto words = vocab;
    std::shuffle(words.begin(), words.end(), rng);
    std::string text;
    for (std::size_t i = 0; i < base_len(rng); ++i) text += (i ? " " : "") + words[i];
    fluent += !detect_collapse(text).collapsed;
    std::shuffle(words.begin(), words.end(), rng);
    std::string phrase;
    for (std::size_t i = 0, n = phrase_len(rng); i < n; ++i) phrase += (i ? " " : "") + words[i];
    std::string spliced = text;
    for (int r = 0; r < 4; ++r) spliced += ". " + phrase;
    misses += !detect_collapse(spliced).collapsed;
  }
  c.expect(fluent == 500, std::to_string(500 - fluent) + " base texts already collapsed");
  c.expect(misses == 0, std::to_string(misses) + " spliced texts missed");
  return c.done("fixtures classified; 500 spliced texts, 0 misses (trigger '" +
                rep.trigger_phrase.value_or("") + "')");
}

// --- 7 ---------------------------------------------------------------------

Outcome concave_diversity() {
  Checker c;
  const auto t0 = Clock::now();
  const auto grid = default_preference_grid();
  std::size_t min_union = SIZE_MAX;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const synthetic::WorldSpec spec{synthetic::FrontShape::kConcaveSqrt, 2000, 0.02,
                                    synthetic::ImbalanceProfile::kUniform, seed};
    const Dataset world = synthetic::generate_world(spec);
    const RewardBounds b = compute_bounds(world);
    const ParetoSubset hq = build_pareto_hq(world, stage1_pareto_threshold(grid.size(), 100));
    std::set<std::string> band_union;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto ls = select_ls_topk(world, grid[i], 100, b);
      std::size_t ls_band = 0;
      for (std::size_t idx : ls.pool_indices) ls_band += synthetic::in_interior_band(world.rewards_at(idx), b);
      c.expect(ls_band == 0, "seed " + std::to_string(seed) + " pref " + std::to_string(i) +
                                 ": ls-top-k took " + std::to_string(ls_band) + " band points");
      const auto s1 = select_stage1(hq.data, build_direction(grid[i], b), 100, b);
      for (std::size_t idx : s1.pool_indices) {
        if (synthetic::in_interior_band(hq.data.rewards_at(idx), b)) band_union.insert(hq.data[idx].id);
      }
    }
    c.expect(!band_union.empty(), "seed " + std::to_string(seed) + ": no band points selected");
    min_union = std::min(min_union, band_union.size());
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "took " + fmt(secs) + " s");
  return c.done("20 seeds: ls-top-k 0 band points, direction union >= " +
                std::to_string(min_union) + " band points, " + fmt(secs) + " s");
}

// --- 8 ---------------------------------------------------------------------

Outcome ambiguity() {
  Checker c;
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> sixteenth(1, 15);
  std::uniform_int_distribution<int> grid(16, 240);
  std::uniform_int_distribution<int> step(1, 6);
  const RewardBounds unit{{0, 0}, {1, 1}};
  std::size_t asymmetric = 0;
  std::size_t constructed = 0;
  while (constructed < 100) {
    // Dyadic coordinates make the two scalarized scores exactly equal.
    const double w0 = sixteenth(rng) / 16.0;
    const PreferenceVector w{w0, 1 - w0};
    const RewardVector a{grid(rng) / 256.0, grid(rng) / 256.0};
    const double t = step(rng) / 16.0 * (rng() % 2 ? 1 : -1);
    const RewardVector b{a[0] + t * w[1], a[1] - t * w[0]};
    if (b[0] < 0 || b[0] > 1 || b[1] < 0 || b[1] > 1) continue;
    ++constructed;
    c.expect(w[0] * a[0] + w[1] * a[1] == w[0] * b[0] + w[1] * b[1], "pair not tied");

    auto pick = [&](const RewardVector& first, const RewardVector& second) {
      Dataset d = Dataset::with_objectives(2);
      d.add({"first", "", "", first, {}});
      d.add({"second", "", "", second, {}});
      return select_ls_topk(d, w, 1, unit).chosen[0];
    };
    c.expect(pick(a, b) == "first" && pick(b, a) == "first",
             "baseline choice depends on content of a tied pair");

    // Offsets along the contour from where the ray crosses it.
    const auto dir = build_direction(w, unit);
    const double dx = dir.compromise[0] - dir.origin[0];
    const double dy = dir.compromise[1] - dir.origin[1];
    const double level = w[0] * a[0] + w[1] * a[1];
    const double lambda = (level - (w[0] * dir.origin[0] + w[1] * dir.origin[1])) /
                          (w[0] * dx + w[1] * dy);
    const double qx = dir.origin[0] + lambda * dx;
    const double qy = dir.origin[1] + lambda * dy;
    const double ux = w[1], uy = -w[0];
    const double sa = (a[0] - qx) * ux + (a[1] - qy) * uy;
    const double sb = (b[0] - qx) * ux + (b[1] - qy) * uy;
    const double da = distance_to_direction(a, dir, unit);
    const double db = distance_to_direction(b, dir, unit);
    if (std::abs(std::abs(sa) - std::abs(sb)) > 1e-9) {
      ++asymmetric;
      c.expect(da != db, "asymmetric pair not separated");
    } else {
      c.expect(std::abs(da - db) < 1e-9, "mirror pair separated");
    }
  }
  return c.done("100 tied pairs: baseline blind, direction separates " +
                std::to_string(asymmetric) + " asymmetric pairs");
}

// --- 9 ---------------------------------------------------------------------

Outcome end_to_end(const fs::path& root, fs::path& first_run) {
  Checker c;
  int wins = 0;
  double slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PipelinePlan plan = plan_from_json(toy_plan(seed));
    const fs::path out = root / ("run-" + std::to_string(seed));
    fs::remove_all(out);
    const auto t0 = Clock::now();
    const RunRecord rec = run_both(plan, out);
    const double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    c.expect(secs < 60.0, "seed " + std::to_string(seed) + " took " + fmt(secs) + " s");

    std::size_t generator_calls = 0;
    for (const auto& [channel, n] : rec.adapter_calls) {
      if (channel.rfind("generator/", 0) == 0) generator_calls += n;
    }
    c.expect(generator_calls == 3 * 2000,
             "seed " + std::to_string(seed) + ": " + std::to_string(generator_calls) + " generator calls");

    const ReplayReport rep = replay(out, root / ("replay-" + std::to_string(seed)));
    c.expect(rep.identical, "seed " + std::to_string(seed) + " replay diverged at " + rep.first_divergence);

    const StageFronts f = compare_stage_fronts(out);
    wins += f.stage2_hv >= f.stage1_hv;
    if (seed == 0) first_run = out;
  }
  c.expect(wins >= 16, "stage 2 HV >= stage 1 HV on only " + std::to_string(wins) + "/20 seeds");
  return c.done("20 seeds, slowest run " + fmt(slowest) + " s, replay identical, 6000 generator "
                "calls each, stage 2 HV >= stage 1 on " + std::to_string(wins) + "/20");
}

// --- 10 --------------------------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> artifact_digests(const fs::path& run) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(run)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), run).string();
    const std::string name = entry.path().filename().string();
    if (name == "timings.json" || name == ".lock" || name.ends_with(".partial.jsonl") ||
        name.ends_with(".tmp")) {
      continue;
    }
    out[rel] = sha256_hex(read_file(entry.path()));
  }
  return out;
}

Outcome adapter_conformance(const fs::path& root) {
  Checker c;
  const std::string toy = PARETOHQD_TOY_ADAPTER_PATH;
  const std::string cli = PARETOHQD_CLI_PATH;

  // Wire round trip of a 1000-example corpus against the in-process toy.
  const Dataset corpus = synthetic::generate_world(
      {synthetic::FrontShape::kConcaveSqrt, 1000, 0.05, synthetic::ImbalanceProfile::kUniform, 10});
  std::vector<json> score_reqs;
  std::vector<json> gen_reqs;
  for (const auto& ex : corpus.examples()) {
    score_reqs.push_back(make_score_request(ex));
    gen_reqs.push_back(make_generate_request(ex.id, ex.prompt));
  }
  const fs::path dir = root / "conformance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_dataset_file(dir / "train.jsonl", corpus);

  AdapterEndpoint scorer_ep;
  scorer_ep.mode = AdapterMode::kSubprocess;
  scorer_ep.command = toy + " score --shape concave_sqrt";
  scorer_ep.max_in_flight = 2;
  AdapterEndpoint gen_ep = scorer_ep;
  gen_ep.command = toy + " generate --train-file " + (dir / "train.jsonl").string() + " --seed 99";
  const auto scored = call_batched([&] { return make_external_adapter(scorer_ep, AdapterKind::kScore); },
                                   score_reqs, batch_options(scorer_ep));
  const auto generated = call_batched([&] { return make_external_adapter(gen_ep, AdapterKind::kGenerate); },
                                      gen_reqs, batch_options(gen_ep));
  const synthetic::ToyScorer local_scorer(synthetic::FrontShape::kConcaveSqrt);
  const synthetic::ToyGenerator local_gen(corpus, 99);
  std::size_t divergences = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    divergences += scored[i] != local_scorer(score_reqs[i]);
    divergences += generated[i] != local_gen(gen_reqs[i]);
  }
  c.expect(divergences == 0, std::to_string(divergences) + " wire divergences");

  // Mid-run kill of the whole CLI during generation, then resume.
  const std::string gen_cmd = "exec " + toy +
                              " --die-after 700 --die-marker died.marker --kill-parent generate"
                              " --train-file {train_file} --seed {seed}";
  const std::string score_cmd = "exec " + toy + " score --shape convex_circle";
  json cfg = toy_plan(3);
  cfg["pipeline"]["scorer"] = {{"mode", "subprocess"}, {"command", score_cmd}};
  cfg["pipeline"]["generator"] = {{"mode", "subprocess"}, {"command", gen_cmd}};

  auto prepare = [&](const std::string& name) {
    const fs::path d = root / name;
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "config.json") << cfg.dump(2) << "\n";
    return d;
  };
  const std::string args = " --config config.json --out run curate --stage both > log.txt 2>&1";

  const fs::path crash = prepare("kill-resume");
  const int first = shell("cd '" + crash.string() + "' && " + cli + args);
  c.expect(first != 0, "CLI survived the simulated crash");
  c.expect(fs::exists(crash / "died.marker"), "adapter did not die");
  std::size_t partial_lines = 0;
  if (fs::exists(crash / "run/augment")) {
    for (const auto& e : fs::directory_iterator(crash / "run/augment")) {
      if (e.path().filename().string().ends_with(".generate.partial.jsonl")) {
        std::ifstream in(e.path());
        for (std::string l; std::getline(in, l);) ++partial_lines;
      }
    }
  }
  c.expect(partial_lines > 0, "nothing to resume from");
  const int second = shell("cd '" + crash.string() + "' && " + cli + args);
  c.expect(second == 0, "resumed run failed with exit " + std::to_string(second));

  const fs::path clean = prepare("clean");
  std::ofstream(clean / "died.marker") << "never die\n";
  c.expect(shell("cd '" + clean.string() + "' && " + cli + args) == 0, "clean run failed");

  const auto resumed_files = artifact_digests(crash / "run");
  const auto clean_files = artifact_digests(clean / "run");
  c.expect(resumed_files == clean_files, "resumed artifacts differ from an uninterrupted run");
  return c.done("1000-example wire round trip, 0 divergences; killed after " +
                std::to_string(partial_lines) + " generated rows, resume matches an "
                "uninterrupted run on " + std::to_string(clean_files.size()) + " artifacts");
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "paretohqd-acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  fs::path first_run;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Pareto layering matches brute-force peeling", layering_oracle},
      {"compromise point law", compromise_law},
      {"distance to ray matches lambda sweep", distance_oracle},
      {"hypervolume", hypervolume_checks},
      {"hyperparameter arithmetic from manifests", [&] {
         if (first_run.empty()) {
           first_run = root / "arith";
           run_both(plan_from_json(toy_plan(0)), first_run);
         }
         return hyperparameter_arithmetic(first_run);
       }},
      {"collapse fixtures and splice property", collapse_fixtures},
      {"concave front diversity", concave_diversity},
      {"scalarization ambiguity", ambiguity},
      {"end-to-end toy pipeline", [&] { return end_to_end(root, first_run); }},
      {"adapter protocol conformance", [&] { return adapter_conformance(root); }},
  };

  // The end-to-end runs also feed the manifest check, so run them first.
  std::vector<Outcome> results(criteria.size());
  const std::vector<std::size_t> order = {0, 1, 2, 3, 8, 4, 5, 6, 7, 9};
  for (std::size_t i : order) {
    try {
      results[i] = criteria[i].second();
    } catch (const std::exception& e) {
      results[i] = {false, std::string("threw: ") + e.what()};
    }
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::cout << "criterion " << (i + 1) << " " << (results[i].pass ? "PASS" : "FAIL") << " "
              << criteria[i].first << ": " << results[i].detail << "\n";
    failed += !results[i].pass;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
