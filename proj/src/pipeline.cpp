#include "paretohqd/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "paretohqd/dataset_io.hpp"
#include "paretohqd/metrics.hpp"
#include "paretohqd/pareto.hpp"
#include "paretohqd/rng.hpp"

namespace paretohqd {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRecordFile = "record.json";
constexpr const char* kLogFile = "adapter_log.jsonl";
constexpr const char* kChecksumFile = "checksums.txt";
constexpr const char* kTimingFile = "timings.json";
constexpr const char* kBoundsFile = "bounds.json";
constexpr const char* kScorePartial = "score.partial.jsonl";

// Files that legitimately differ between otherwise identical runs.
bool is_volatile(const std::string& rel) {
  auto ends_with = [&](std::string_view suffix) {
    return rel.size() >= suffix.size() &&
           rel.compare(rel.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  const std::string name = fs::path(rel).filename().string();
  return name == kTimingFile || name == kChecksumFile || name == ".lock" ||
         ends_with(".partial.jsonl") || ends_with(".tmp");
}

std::vector<std::string> artifact_files(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (!is_volatile(rel)) out.push_back(std::move(rel));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string pref_stem(std::size_t i, std::size_t n) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n - 1).size());
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "pref_" + digits;
}

json weights_json(const PreferenceVector& w) {
  return std::vector<double>(w.weights().begin(), w.weights().end());
}

std::string dump_lines(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream os;
  write_dataset(os, d);
  return os.str();
}

std::string selection_text(const SelectionResult& r) {
  std::ostringstream os;
  write_selection(os, r);
  return os.str();
}

void write_checksums(const fs::path& out) {
  std::string text;
  for (const auto& rel : artifact_files(out)) {
    text += sha256_hex(read_file(out / rel)) + "  " + rel + "\n";
  }
  write_file_atomic(out / kChecksumFile, text);
}

// Requests already answered in a previous, interrupted attempt are read
// back from `partial`; the rest go through the adapter and are appended as
// they complete.
std::vector<json> call_resumable(
    const AdapterFactory& factory, const std::vector<json>& requests,
    const BatchOptions& batch, const std::optional<fs::path>& partial,
    const std::function<void(const json&, const json&)>& on_restored) {
  std::map<std::string, json> done;
  if (partial && fs::exists(*partial)) {
    std::ifstream in(*partial);
    std::string line;
    std::string kept;
    while (std::getline(in, line)) {
      try {
        const json j = json::parse(line);
        done[j.at("request").dump()] = j.at("response");
        kept += line + "\n";
      } catch (const std::exception&) {
        break;  // torn final line from a killed run
      }
    }
    in.close();
    write_file_atomic(*partial, kept);
  }

  std::vector<json> responses(requests.size());
  std::vector<json> pending;
  std::vector<std::size_t> pending_at;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto it = done.find(requests[i].dump());
    if (it != done.end()) {
      responses[i] = it->second;
      if (on_restored) on_restored(requests[i], it->second);
    } else {
      pending.push_back(requests[i]);
      pending_at.push_back(i);
    }
  }

  std::ofstream sink;
  if (partial) {
    if (partial->has_parent_path()) fs::create_directories(partial->parent_path());
    sink.open(*partial, std::ios::app | std::ios::binary);
  }
  auto on_batch = [&](std::size_t begin, std::span<const json> got) {
    if (!sink.is_open()) return;
    for (std::size_t i = 0; i < got.size(); ++i) {
      json row;
      row["request"] = pending[begin + i];
      row["response"] = got[i];
      sink << row.dump() << '\n';
    }
    sink.flush();
  };
  const auto got = call_batched(factory, pending, batch, on_batch);
  for (std::size_t i = 0; i < got.size(); ++i) responses[pending_at[i]] = got[i];
  if (sink.is_open()) {
    sink.close();
    fs::remove(*partial);
  }
  return responses;
}

// Adapter factory for one channel: live or served from the replay log, and
// always recorded into `log`.
AdapterFactory channel_factory(AdapterFactory live, const std::string& channel,
                               AdapterLog& log, const RunContext& ctx) {
  if (!ctx.replay_log && !live) {
    throw ConfigError("no " + channel + " endpoint configured");
  }
  const AdapterLog* replay_log = ctx.replay_log;
  return [live = std::move(live), channel, &log, replay_log]() -> std::unique_ptr<Adapter> {
    std::unique_ptr<Adapter> inner;
    if (replay_log) {
      inner = std::make_unique<ReplayAdapter>(*replay_log, channel);
    } else {
      inner = live();
    }
    return std::make_unique<LoggingAdapter>(std::move(inner), channel, log);
  };
}

std::function<void(const json&, const json&)> restore_into(AdapterLog& log,
                                                           const std::string& channel) {
  return [&log, channel](const json& req, const json& resp) { log.record(channel, req, resp); };
}

json manifest_to_json(const SelectionManifest& m) {
  json j;
  j["preference_index"] = m.preference_index;
  j["preference"] = weights_json(m.preference);
  j["stage"] = m.stage;
  j["pool"] = m.pool_label;
  j["seed"] = m.seed;
  j["requested"] = m.requested;
  j["selected"] = m.chosen.size();
  j["n_p"] = m.n_p;
  j["train_file"] = m.train_file;
  j["chosen"] = m.chosen;
  j["distances"] = m.distances;
  return j;
}

SelectionManifest manifest_from_json(const json& j) {
  SelectionManifest m;
  m.preference_index = j.at("preference_index").get<std::size_t>();
  m.preference = PreferenceVector(j.at("preference").get<std::vector<double>>());
  m.stage = j.at("stage").get<int>();
  m.pool_label = j.at("pool").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.requested = j.at("requested").get<std::size_t>();
  m.n_p = j.at("n_p").get<std::size_t>();
  m.train_file = j.at("train_file").get<std::string>();
  m.chosen = j.at("chosen").get<std::vector<std::string>>();
  m.distances = j.at("distances").get<std::vector<double>>();
  return m;
}

json manifest_sidecar(const SelectionManifest& m) {
  json j = manifest_to_json(m);
  j.erase("chosen");
  j.erase("distances");
  return j;
}

class Stopwatch {
 public:
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    times_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : times_) j[k] = v;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> times_;
};

void write_timings(const fs::path& out, const std::string& stage, const Stopwatch& sw) {
  json all = json::object();
  if (fs::exists(out / kTimingFile)) {
    try {
      all = json::parse(read_file(out / kTimingFile));
    } catch (const std::exception&) {
      all = json::object();
    }
  }
  all[stage] = sw.to_json();
  write_file_atomic(out / kTimingFile, all.dump(2) + "\n");
}

void persist_run(const fs::path& out, RunRecord& record, const AdapterLog& stage_log,
                 const AdapterLog* earlier) {
  AdapterLog merged;
  if (earlier) merged.absorb(*earlier);
  merged.absorb(stage_log);
  std::ostringstream log_text;
  merged.write(log_text);
  write_file_atomic(out / kLogFile, log_text.str());
  write_file_atomic(out / kRecordFile, record_to_json(record).dump(2) + "\n");
  write_checksums(out);
}

void add_call_counts(RunRecord& record, const AdapterLog& log,
                     const std::vector<std::string>& channels) {
  for (const auto& c : channels) {
    if (const auto n = log.count(c); n > 0) record.adapter_calls[c] += n;
  }
}

fs::path request_root(const fs::path& out, const RunContext& ctx) {
  return ctx.logged_root.empty() ? out : ctx.logged_root;
}

void invoke_trainer(const PipelinePlan& plan, const RunContext& ctx, AdapterLog& log,
                    const fs::path& out, int stage,
                    const std::vector<SelectionManifest>& manifests) {
  const bool live = static_cast<bool>(ctx.adapters.trainer);
  if (!live && !(ctx.replay_log && plan.trainer.configured())) return;
  const fs::path root = request_root(out, ctx);
  std::vector<json> requests;
  for (const auto& m : manifests) {
    requests.push_back(make_train_request(m.preference, (root / m.train_file).string(),
                                          stage, plan.hyperparameters));
  }
  auto factory = channel_factory(ctx.adapters.trainer, "trainer", log, ctx);
  for (const auto& r : call_batched(factory, requests, batch_options(plan.trainer))) {
    check_train_response(r);
  }
}

DirectionSelector default_selector() {
  return [](const Dataset& pool, const PreferenceDirection& p, std::size_t count,
            const RewardBounds& b, bool normalized, std::string label) {
    return select_stage1(pool, p, count, b, normalized, std::move(label));
  };
}

std::vector<std::string> sorted_channels(std::size_t slots) {
  std::vector<std::string> c{"scorer", "trainer"};
  for (std::size_t j = 0; j < slots; ++j) c.push_back("generator/" + std::to_string(j));
  std::sort(c.begin(), c.end());
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Plan

std::vector<PreferenceVector> default_preference_grid() {
  std::vector<PreferenceVector> out;
  for (int i = 0; i <= 10; ++i) {
    const double a = i / 10.0;
    out.push_back(PreferenceVector({a, 1.0 - a}));
  }
  return out;
}

void PipelinePlan::validate() const {
  if (dataset_path.empty() == !world.has_value()) {
    throw ConfigError("exactly one of dataset path or world must be given");
  }
  if (objective_names.size() < 2) throw ConfigError("objective count must be at least 2");
  if (world && objective_names.size() != 2) {
    throw ConfigError("synthetic worlds have exactly 2 objectives");
  }
  if (preferences.empty()) throw ConfigError("at least one preference is required");
  for (const auto& w : preferences) {
    if (w.size() != objective_count()) {
      throw ConfigError("preference arity " + std::to_string(w.size()) +
                        " does not match objective count " +
                        std::to_string(objective_count()));
    }
  }
  if (k == 0) throw ConfigError("k must be positive");
  if (n_add == 0) throw ConfigError("n_add must be positive");
  if (n_p_stage1 && *n_p_stage1 == 0) throw ConfigError("n_p_stage1 must be positive");
  if (n_p_stage2 && *n_p_stage2 == 0) throw ConfigError("n_p_stage2 must be positive");
  if (!hyperparameters.is_object()) throw ConfigError("hyperparameters must be an object");
}

json plan_to_json(const PipelinePlan& plan) {
  json j;
  json dataset;
  if (!plan.dataset_path.empty()) dataset["path"] = plan.dataset_path;
  dataset["objectives"] = plan.objective_names;
  j["dataset"] = dataset;
  if (plan.world) j["world"] = synthetic::world_spec_to_json(*plan.world);
  json prefs = json::array();
  for (const auto& w : plan.preferences) prefs.push_back(weights_json(w));
  j["preferences"] = prefs;
  j["geometry"] = json{{"normalized", plan.normalized}};
  json pipe;
  pipe["k"] = plan.k;
  pipe["n_add"] = plan.n_add;
  if (plan.n_p_stage1) pipe["n_p_stage1"] = *plan.n_p_stage1;
  if (plan.n_p_stage2) pipe["n_p_stage2"] = *plan.n_p_stage2;
  pipe["rescore"] = plan.rescore;
  pipe["scorer"] = endpoint_to_json(plan.scorer);
  pipe["generator"] = endpoint_to_json(plan.generator);
  pipe["trainer"] = endpoint_to_json(plan.trainer);
  pipe["hyperparameters"] = plan.hyperparameters;
  j["pipeline"] = pipe;
  j["seed"] = plan.seed;
  return j;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

PreferenceVector preference_from_weights(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  // Hand-written grids such as [0.33, 0.33, 0.33] are rescaled; anything
  // further off is a configuration mistake.
  if (std::abs(sum - 1.0) > kTolerance && std::abs(sum - 1.0) <= 0.01 + 1e-12) {
    return PreferenceVector::normalized(std::move(weights));
  }
  return PreferenceVector(std::move(weights));
}

std::vector<PreferenceVector> preferences_from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open preference file '" + path.string() + "'");
  std::vector<PreferenceVector> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(preference_from_weights(json::parse(line).get<std::vector<double>>()));
    } catch (const std::exception& e) {
      throw ConfigError("bad preference at line " + std::to_string(line_no) + " of '" +
                        path.string() + "': " + e.what());
    }
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return fs::absolute(path).lexically_normal();
}

}  // namespace

PipelinePlan plan_from_json(const json& j, const fs::path& base) {
  reject_unknown(j, {"dataset", "world", "preferences", "geometry", "pipeline", "seed"}, "plan");
  PipelinePlan plan;
  try {
    if (j.contains("seed")) plan.seed = j.at("seed").get<std::uint64_t>();

    std::optional<std::size_t> objective_count;
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      reject_unknown(d, {"path", "objectives", "objective_count"}, "dataset");
      if (d.contains("path")) plan.dataset_path = resolve(base, d.at("path").get<std::string>()).string();
      if (d.contains("objectives")) {
        plan.objective_names = d.at("objectives").get<std::vector<std::string>>();
      }
      if (d.contains("objective_count")) objective_count = d.at("objective_count").get<std::size_t>();
    }
    if (j.contains("world")) {
      plan.world = synthetic::world_spec_from_json(j.at("world"));
      if (!j.at("world").contains("seed")) plan.world->seed = derive_seed(plan.seed, "world");
    }
    if (plan.objective_names.empty()) {
      const std::size_t m = objective_count.value_or(plan.world ? 2 : 0);
      if (m == 0) throw ConfigError("dataset block needs objectives or objective_count");
      plan.objective_names = Dataset::with_objectives(m).objective_names();
    } else if (objective_count && *objective_count != plan.objective_names.size()) {
      throw ConfigError("objective_count disagrees with objectives");
    }

    if (j.contains("preferences")) {
      const auto& p = j.at("preferences");
      if (p.is_array()) {
        for (const auto& w : p) plan.preferences.push_back(preference_from_weights(w.get<std::vector<double>>()));
      } else {
        reject_unknown(p, {"file"}, "preferences");
        plan.preferences = preferences_from_file(resolve(base, p.at("file").get<std::string>()));
      }
    } else if (plan.objective_names.size() == 2) {
      plan.preferences = default_preference_grid();
    } else {
      throw ConfigError("preferences are required when there are more than 2 objectives");
    }

    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      reject_unknown(g, {"normalized"}, "geometry");
      if (g.contains("normalized")) plan.normalized = g.at("normalized").get<bool>();
    }

    if (j.contains("pipeline")) {
      const auto& p = j.at("pipeline");
      reject_unknown(p, {"k", "n_add", "n_p_stage1", "n_p_stage2", "rescore", "scorer",
                         "generator", "trainer", "hyperparameters"},
                     "pipeline");
      if (p.contains("k")) plan.k = p.at("k").get<std::size_t>();
      if (p.contains("n_add")) plan.n_add = p.at("n_add").get<std::size_t>();
      if (p.contains("n_p_stage1")) plan.n_p_stage1 = p.at("n_p_stage1").get<std::size_t>();
      if (p.contains("n_p_stage2")) plan.n_p_stage2 = p.at("n_p_stage2").get<std::size_t>();
      if (p.contains("rescore")) plan.rescore = p.at("rescore").get<bool>();
      if (p.contains("scorer")) plan.scorer = endpoint_from_json(p.at("scorer"));
      if (p.contains("generator")) plan.generator = endpoint_from_json(p.at("generator"));
      if (p.contains("trainer")) plan.trainer = endpoint_from_json(p.at("trainer"));
      if (p.contains("hyperparameters")) plan.hyperparameters = p.at("hyperparameters");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid plan: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("invalid plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

// ---------------------------------------------------------------------------
// Adapters

AdapterSet make_adapters(const PipelinePlan& plan) {
  AdapterSet set;
  auto external = [](const AdapterEndpoint& e, AdapterKind kind,
                     const std::map<std::string, std::string>& values) -> AdapterFactory {
    AdapterEndpoint resolved = e;
    resolved.command = substitute_placeholders(e.command, values);
    resolved.url = substitute_placeholders(e.url, values);
    return [resolved, kind] { return make_external_adapter(resolved, kind); };
  };
  const std::map<std::string, std::string> seed_only{{"seed", std::to_string(plan.seed)}};

  // Synthetic worlds default to the built-in toy scorer and generator.
  auto effective = [&plan](const AdapterEndpoint& e) {
    if (e.mode == AdapterMode::kNone && plan.world) return AdapterMode::kToy;
    return e.mode;
  };
  auto need_world = [&plan](const char* what) {
    if (!plan.world) throw ConfigError(std::string("toy ") + what + " needs a world block");
    return plan.world->shape;
  };

  switch (effective(plan.scorer)) {
    case AdapterMode::kNone:
      break;
    case AdapterMode::kToy: {
      const synthetic::ToyScorer scorer(need_world("scorer"));
      set.scorer = [scorer] {
        return std::make_unique<FunctionAdapter>([scorer](const json& r) { return scorer(r); });
      };
      break;
    }
    default:
      set.scorer = external(plan.scorer, AdapterKind::kScore, seed_only);
  }

  switch (effective(plan.generator)) {
    case AdapterMode::kNone:
      break;
    case AdapterMode::kToy:
      need_world("generator");
      set.generator = [](const GeneratorContext& c) -> AdapterFactory {
        if (!c.training_set) throw ConfigError("toy generator needs a training set");
        auto gen = std::make_shared<synthetic::ToyGenerator>(*c.training_set, c.seed);
        return [gen] {
          return std::make_unique<FunctionAdapter>([gen](const json& r) { return (*gen)(r); });
        };
      };
      break;
    default: {
      const AdapterEndpoint e = plan.generator;
      set.generator = [e, external](const GeneratorContext& c) {
        return external(e, AdapterKind::kGenerate,
                        {{"rep", std::to_string(c.slot)},
                         {"train_file", c.train_file.string()},
                         {"seed", std::to_string(c.seed)}});
      };
    }
  }

  switch (plan.trainer.mode) {
    case AdapterMode::kNone:
      break;
    case AdapterMode::kToy:
      set.trainer = [] {
        return std::make_unique<FunctionAdapter>([](const json& r) {
          return json{{"status", "ok"}, {"train_file", r.at("train_file")}};
        });
      };
      break;
    default:
      set.trainer = external(plan.trainer, AdapterKind::kTrain, seed_only);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Scoring

Dataset score_dataset(const Dataset& d, const AdapterFactory& scorer,
                      const ScoreOptions& options) {
  if (d.empty()) throw DataError("cannot score an empty dataset");
  std::vector<json> requests;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (options.rescore || !d[i].rewards) {
      requests.push_back(make_score_request(d[i]));
      targets.push_back(i);
    }
  }
  if (requests.empty()) return d;
  if (!scorer) throw ConfigError("dataset has unscored examples and no scorer is configured");

  const auto responses =
      call_resumable(scorer, requests, options.batch, options.partial_path, options.on_restored);

  std::vector<ScoredExample> examples(d.examples().begin(), d.examples().end());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    auto& ex = examples[targets[r]];
    ex.rewards = parse_score_response(responses[r], ex.id, d.objective_count());
  }
  Dataset out(d.objective_names());
  for (auto& ex : examples) out.add(std::move(ex));
  return out;
}

Dataset load_source_dataset(const PipelinePlan& plan) {
  if (plan.world) return synthetic::generate_world(*plan.world);
  return read_dataset_file(plan.dataset_path, plan.objective_names);
}

// ---------------------------------------------------------------------------
// Record

json record_to_json(const RunRecord& r) {
  json j;
  j["plan"] = plan_to_json(r.plan);
  if (r.stage1) {
    const auto& s = *r.stage1;
    json s1;
    s1["bounds"] = bounds_to_json(s.bounds);
    s1["n_p"] = s.n_p;
    s1["layers_used"] = s.layers_used;
    s1["total_layers"] = s.total_layers;
    s1["pareto_size"] = s.pareto_size;
    s1["exhausted"] = s.exhausted;
    json sel = json::array();
    for (const auto& m : s.selections) sel.push_back(manifest_to_json(m));
    s1["selections"] = sel;
    j["stage1"] = s1;
  }
  if (r.stage2) {
    const auto& s = *r.stage2;
    json s2;
    s2["representatives"] = s.representatives;
    s2["prompts_sampled"] = s.prompts_sampled;
    s2["n_p"] = s.n_p;
    json pools = json::array();
    for (const auto& p : s.pools) {
      pools.push_back({{"slot", p.slot},
                       {"preference_index", p.preference_index},
                       {"size", p.size},
                       {"n_p", p.n_p},
                       {"layers_used", p.layers_used},
                       {"pareto_size", p.pareto_size},
                       {"exhausted", p.exhausted}});
    }
    s2["pools"] = pools;
    json matches = json::array();
    for (const auto& m : s.matches) {
      matches.push_back({{"preference_index", m.preference_index},
                         {"pool", m.pool},
                         {"tie", m.tie},
                         {"seed", m.seed}});
    }
    s2["matches"] = matches;
    json sel = json::array();
    for (const auto& m : s.selections) sel.push_back(manifest_to_json(m));
    s2["selections"] = sel;
    j["stage2"] = s2;
  }
  json calls = json::object();
  for (const auto& [k, v] : r.adapter_calls) calls[k] = v;
  j["adapter_calls"] = calls;
  j["warnings"] = r.warnings;
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  try {
    r.plan = plan_from_json(j.at("plan"));
    if (j.contains("stage1")) {
      const auto& s1 = j.at("stage1");
      Stage1Record s;
      s.bounds = bounds_from_json(s1.at("bounds"));
      s.n_p = s1.at("n_p").get<std::size_t>();
      s.layers_used = s1.at("layers_used").get<std::size_t>();
      s.total_layers = s1.at("total_layers").get<std::size_t>();
      s.pareto_size = s1.at("pareto_size").get<std::size_t>();
      s.exhausted = s1.at("exhausted").get<bool>();
      for (const auto& m : s1.at("selections")) s.selections.push_back(manifest_from_json(m));
      r.stage1 = std::move(s);
    }
    if (j.contains("stage2")) {
      const auto& s2 = j.at("stage2");
      Stage2Record s;
      s.representatives = s2.at("representatives").get<std::vector<std::size_t>>();
      s.prompts_sampled = s2.at("prompts_sampled").get<std::size_t>();
      s.n_p = s2.at("n_p").get<std::size_t>();
      for (const auto& p : s2.at("pools")) {
        s.pools.push_back({p.at("slot").get<std::size_t>(),
                           p.at("preference_index").get<std::size_t>(),
                           p.at("size").get<std::size_t>(), p.at("n_p").get<std::size_t>(),
                           p.at("layers_used").get<std::size_t>(),
                           p.at("pareto_size").get<std::size_t>(), p.at("exhausted").get<bool>()});
      }
      for (const auto& m : s2.at("matches")) {
        s.matches.push_back({m.at("preference_index").get<std::size_t>(),
                             m.at("pool").get<std::size_t>(), m.at("tie").get<bool>(),
                             m.at("seed").get<std::uint64_t>()});
      }
      for (const auto& m : s2.at("selections")) s.selections.push_back(manifest_from_json(m));
      r.stage2 = std::move(s);
    }
    for (auto it = j.at("adapter_calls").begin(); it != j.at("adapter_calls").end(); ++it) {
      r.adapter_calls[it.key()] = it->get<std::size_t>();
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

RunRecord load_record(const fs::path& dir) {
  const fs::path path = dir / kRecordFile;
  if (!fs::exists(path)) {
    throw PreconditionError("no run record in '" + dir.string() + "'; run stage 1 first");
  }
  try {
    return record_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw DataError("malformed run record: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------
// Stages

RunRecord run_stage1(const PipelinePlan& plan, const fs::path& out_arg, const RunContext& ctx) {
  plan.validate();
  const fs::path out = fs::absolute(out_arg).lexically_normal();
  fs::create_directories(out);
  for (const char* stale : {"stage1", "stage2", "augment"}) fs::remove_all(out / stale);
  for (const char* stale : {kRecordFile, kLogFile, kChecksumFile, kTimingFile, kBoundsFile}) {
    fs::remove(out / stale);
  }

  Stopwatch sw;
  AdapterLog log;
  RunRecord record;
  record.plan = plan;
  const auto selector = ctx.selector ? ctx.selector : default_selector();

  Dataset source = load_source_dataset(plan);
  if (source.empty()) throw DataError("source dataset is empty");
  if (!source.fully_scored() || plan.rescore) {
    ScoreOptions opts;
    opts.batch = batch_options(plan.scorer);
    opts.rescore = plan.rescore;
    opts.partial_path = out / kScorePartial;
    opts.on_restored = restore_into(log, "scorer");
    source = score_dataset(source, channel_factory(ctx.adapters.scorer, "scorer", log, ctx),
                           opts);
  }
  sw.lap("score");

  Stage1Record s1;
  s1.bounds = compute_bounds(source);
  s1.n_p = plan.n_p_stage1.value_or(stage1_pareto_threshold(plan.preferences.size(), plan.k));
  const ParetoSubset hq = build_pareto_hq(source, s1.n_p);
  s1.layers_used = hq.layers_used;
  s1.total_layers = hq.total_layers;
  s1.pareto_size = hq.data.size();
  s1.exhausted = hq.exhausted;
  if (hq.exhausted) {
    record.warnings.push_back("stage 1: dataset holds " + std::to_string(source.size()) +
                              " examples, fewer than N_p = " + std::to_string(s1.n_p));
  }
  write_file_atomic(out / kBoundsFile, bounds_to_json(s1.bounds).dump() + "\n");
  sw.lap("pareto");

  const std::size_t n = plan.preferences.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = plan.preferences[i];
    const auto dir = build_direction(w, s1.bounds);
    const auto sel = selector(hq.data, dir, plan.k, s1.bounds, plan.normalized, "pareto");
    const std::string stem = "stage1/" + pref_stem(i, n);

    SelectionManifest m;
    m.preference_index = i;
    m.preference = w;
    m.stage = 1;
    m.pool_label = sel.source_label;
    m.seed = plan.seed;
    m.requested = plan.k;
    m.n_p = s1.n_p;
    m.train_file = stem + ".jsonl";
    m.chosen = sel.chosen;
    m.distances = sel.scores;

    write_file_atomic(out / (stem + ".jsonl"), dataset_text(hq.data.subset(sel.pool_indices)));
    write_file_atomic(out / (stem + ".selection.jsonl"), selection_text(sel));
    write_file_atomic(out / (stem + ".manifest.json"), manifest_sidecar(m).dump(2) + "\n");
    s1.selections.push_back(std::move(m));
  }
  sw.lap("select");

  invoke_trainer(plan, ctx, log, out, 1, s1.selections);
  sw.lap("train");

  record.stage1 = std::move(s1);
  add_call_counts(record, log, {"scorer", "trainer"});
  persist_run(out, record, log, nullptr);
  write_timings(out, "stage1", sw);
  return record;
}

RunRecord run_stage2(const PipelinePlan& plan, const fs::path& out_arg, const RunContext& ctx) {
  plan.validate();
  const fs::path out = fs::absolute(out_arg).lexically_normal();
  RunRecord record = load_record(out);
  if (!record.stage1) throw PreconditionError("run record has no stage 1; run stage 1 first");
  if (plan_to_json(record.plan) != plan_to_json(plan)) {
    throw ConfigError("plan differs from the one recorded by stage 1 in '" + out.string() + "'");
  }
  fs::remove_all(out / "stage2");
  fs::remove_all(out / "augment");
  record.stage2.reset();

  AdapterLog earlier;
  if (fs::exists(out / kLogFile)) {
    std::ifstream in(out / kLogFile);
    earlier.load(in);
  }

  Stopwatch sw;
  AdapterLog log;
  const auto selector = ctx.selector ? ctx.selector : default_selector();
  const Stage1Record& s1 = *record.stage1;
  const std::size_t m_obj = plan.objective_count();
  const std::size_t n = plan.preferences.size();

  Stage2Record s2;
  s2.representatives = representative_preferences(plan.preferences, m_obj);
  s2.n_p = plan.n_p_stage2.value_or(stage2_pareto_threshold(n, plan.k));

  // Prompt sample, uniform without replacement.
  const Dataset source = load_source_dataset(plan);
  if (source.empty()) throw DataError("source dataset is empty");
  std::size_t n_sample = plan.n_add;
  if (n_sample > source.size()) {
    record.warnings.push_back("stage 2: n_add = " + std::to_string(plan.n_add) +
                              " exceeds the " + std::to_string(source.size()) +
                              " available prompts; using all of them");
    n_sample = source.size();
  }
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(plan.seed, "prompt-sample");
  for (std::size_t i = 0; i < n_sample; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(n_sample);
  s2.prompts_sampled = n_sample;
  {
    std::vector<json> rows;
    for (std::size_t idx : order) rows.push_back({{"id", source[idx].id}, {"prompt", source[idx].prompt}});
    write_file_atomic(out / "augment/prompts.jsonl", dump_lines(rows));
  }
  sw.lap("sample");

  // One augmentation pool per representative model.
  std::vector<ParetoSubset> pools;
  for (std::size_t slot = 0; slot < s2.representatives.size(); ++slot) {
    const std::size_t pref_index = s2.representatives[slot];
    const fs::path train_file = out / s1.selections.at(pref_index).train_file;
    const Dataset training = read_dataset_file(train_file, plan.objective_names);

    GeneratorContext gctx;
    gctx.slot = slot;
    gctx.preference_index = pref_index;
    gctx.train_file = train_file;
    gctx.training_set = &training;
    gctx.seed = derive_seed(plan.seed, "generator", slot);

    const std::string channel = "generator/" + std::to_string(slot);
    AdapterFactory live;
    if (!ctx.replay_log) {
      if (!ctx.adapters.generator) throw ConfigError("no generator endpoint configured");
      live = ctx.adapters.generator(gctx);
    }
    std::vector<json> requests;
    std::vector<std::string> ids;
    for (std::size_t idx : order) {
      ids.push_back("aug" + std::to_string(slot) + "-" + source[idx].id);
      requests.push_back(make_generate_request(ids.back(), source[idx].prompt));
    }
    const std::string tag = "augment/pool_" + std::to_string(slot);
    const auto responses =
        call_resumable(channel_factory(live, channel, log, ctx), requests,
                       batch_options(plan.generator), out / (tag + ".generate.partial.jsonl"),
                       restore_into(log, channel));

    Dataset generated(plan.objective_names);
    for (std::size_t r = 0; r < responses.size(); ++r) {
      ScoredExample ex;
      ex.id = ids[r];
      ex.prompt = source[order[r]].prompt;
      ex.response = parse_generate_response(responses[r], ex.id);
      generated.add(std::move(ex));
    }
    ScoreOptions opts;
    opts.batch = batch_options(plan.scorer);
    opts.partial_path = out / (tag + ".score.partial.jsonl");
    opts.on_restored = restore_into(log, "scorer");
    Dataset scored = score_dataset(
        generated, channel_factory(ctx.adapters.scorer, "scorer", log, ctx), opts);
    write_file_atomic(out / (tag + ".jsonl"), dataset_text(scored));

    ParetoSubset hq = build_pareto_hq(scored, s2.n_p);
    AugmentationPool info;
    info.slot = slot;
    info.preference_index = pref_index;
    info.size = scored.size();
    info.n_p = s2.n_p;
    info.layers_used = hq.layers_used;
    info.pareto_size = hq.data.size();
    info.exhausted = hq.exhausted;
    if (hq.exhausted) {
      record.warnings.push_back("stage 2: pool " + std::to_string(slot) + " holds " +
                                std::to_string(scored.size()) + " examples, fewer than N_p = " +
                                std::to_string(s2.n_p));
    }
    s2.pools.push_back(info);
    pools.push_back(std::move(hq));
  }
  sw.lap("augment");

  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = plan.preferences[i];
    const std::uint64_t seed = derive_seed(plan.seed, "pool-match", i);
    const PoolMatch match = match_stage2_pool(w, seed);
    s2.matches.push_back({i, match.pool, match.tie, seed});

    const auto& pool = pools.at(match.pool);
    const std::string label = "add-pareto/" + std::to_string(match.pool);
    const std::size_t count = (plan.k + 1) / 2;
    const auto sel = selector(pool.data, build_direction(w, s1.bounds), count, s1.bounds,
                              plan.normalized, label);
    const std::string stem = "stage2/" + pref_stem(i, n);

    SelectionManifest m;
    m.preference_index = i;
    m.preference = w;
    m.stage = 2;
    m.pool_label = sel.source_label;
    m.seed = seed;
    m.requested = count;
    m.n_p = s2.n_p;
    m.train_file = stem + ".jsonl";
    m.chosen = sel.chosen;
    m.distances = sel.scores;

    write_file_atomic(out / (stem + ".jsonl"), dataset_text(pool.data.subset(sel.pool_indices)));
    write_file_atomic(out / (stem + ".selection.jsonl"), selection_text(sel));
    write_file_atomic(out / (stem + ".manifest.json"), manifest_sidecar(m).dump(2) + "\n");
    s2.selections.push_back(std::move(m));
  }
  sw.lap("select");

  invoke_trainer(plan, ctx, log, out, 2, s2.selections);
  sw.lap("train");

  record.stage2 = std::move(s2);
  add_call_counts(record, log, sorted_channels(record.stage2->representatives.size()));
  persist_run(out, record, log, &earlier);
  write_timings(out, "stage2", sw);
  return record;
}

// ---------------------------------------------------------------------------
// Replay and reporting

ReplayReport replay(const fs::path& record_dir_arg, const fs::path& scratch,
                    DirectionSelector selector) {
  const fs::path record_dir = fs::absolute(record_dir_arg).lexically_normal();
  const RunRecord record = load_record(record_dir);
  if (!record.stage1) throw PreconditionError("run record has no stage 1");
  AdapterLog log;
  if (fs::exists(record_dir / kLogFile)) {
    std::ifstream in(record_dir / kLogFile);
    log.load(in);
  }

  fs::remove_all(scratch);
  fs::create_directories(scratch);
  RunContext ctx;
  ctx.replay_log = &log;
  ctx.selector = std::move(selector);
  ctx.logged_root = record_dir;
  run_stage1(record.plan, scratch, ctx);
  if (record.stage2) run_stage2(record.plan, scratch, ctx);

  ReplayReport report;
  std::set<std::string> all;
  for (auto& f : artifact_files(record_dir)) all.insert(f);
  for (auto& f : artifact_files(scratch)) all.insert(f);
  for (const auto& rel : all) {
    report.compared.push_back(rel);
    const fs::path a = record_dir / rel;
    const fs::path b = scratch / rel;
    const bool same = fs::exists(a) && fs::exists(b) && read_file(a) == read_file(b);
    if (!same && report.identical) {
      report.identical = false;
      report.first_divergence = rel;
    }
  }
  return report;
}

namespace {

std::vector<RewardVector> training_means(const fs::path& dir,
                                         const std::vector<SelectionManifest>& manifests,
                                         const std::vector<std::string>& names) {
  std::vector<RewardVector> means;
  for (const auto& m : manifests) {
    const Dataset d = read_dataset_file(dir / m.train_file, names);
    if (d.empty()) continue;
    std::vector<double> sum(names.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& r = d.rewards_at(i);
      for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += r[c];
    }
    for (double& s : sum) s /= static_cast<double>(d.size());
    means.emplace_back(std::move(sum));
  }
  return means;
}

double normalized_hv(const std::vector<RewardVector>& means, const RewardBounds& b) {
  std::vector<RewardVector> pts;
  for (const auto& m : means) pts.push_back(normalize(m, b));
  return hypervolume(pts, RewardVector(std::vector<double>(b.size(), 0.0)));
}

}  // namespace

StageFronts compare_stage_fronts(const fs::path& record_dir) {
  const RunRecord record = load_record(record_dir);
  if (!record.stage1 || !record.stage2) {
    throw PreconditionError("comparing stage fronts needs both stages");
  }
  StageFronts f;
  const auto& names = record.plan.objective_names;
  f.stage1_means = training_means(record_dir, record.stage1->selections, names);
  f.stage2_means = training_means(record_dir, record.stage2->selections, names);
  f.stage1_hv = normalized_hv(f.stage1_means, record.stage1->bounds);
  f.stage2_hv = normalized_hv(f.stage2_means, record.stage1->bounds);
  return f;
}

std::string summarize_run(const RunRecord& r) {
  std::ostringstream os;
  auto mean_distance = [](const SelectionManifest& m) {
    if (m.distances.empty()) return 0.0;
    return std::accumulate(m.distances.begin(), m.distances.end(), 0.0) /
           static_cast<double>(m.distances.size());
  };
  auto weights = [](const PreferenceVector& w) {
    std::string s = "[";
    for (std::size_t i = 0; i < w.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%.3g", i ? ", " : "", w[i]);
      s += buf;
    }
    return s + "]";
  };
  auto line = [&](const SelectionManifest& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "  %-20s %-14s selected %4zu  mean distance %.6f\n",
                  weights(m.preference).c_str(), m.pool_label.c_str(), m.chosen.size(),
                  mean_distance(m));
    return std::string(buf);
  };
  if (r.stage1) {
    const auto& s = *r.stage1;
    os << "stage 1: N_p " << s.n_p << ", Pareto pool " << s.pareto_size << " examples from "
       << s.layers_used << " of " << s.total_layers << " layers\n";
    for (const auto& m : s.selections) os << line(m);
  }
  if (r.stage2) {
    const auto& s = *r.stage2;
    os << "stage 2: " << s.prompts_sampled << " prompts, N_p " << s.n_p << "\n";
    for (const auto& p : s.pools) {
      os << "  pool " << p.slot << " (preference " << p.preference_index << "): " << p.size
         << " generated, " << p.pareto_size << " kept from " << p.layers_used << " layers\n";
    }
    for (const auto& m : s.selections) os << line(m);
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace paretohqd
