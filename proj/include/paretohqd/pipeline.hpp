#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paretohqd/adapters.hpp"
#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"
#include "paretohqd/selection.hpp"
#include "paretohqd/synthetic.hpp"

namespace paretohqd {

/// Everything a two-stage curation run needs. Either `dataset_path` or
/// `world` names the source corpus.
struct PipelinePlan {
  std::string dataset_path;
  std::optional<synthetic::WorldSpec> world;
  std::vector<std::string> objective_names;
  std::vector<PreferenceVector> preferences;
  std::size_t k = 100;
  std::size_t n_add = 10000;
  std::optional<std::size_t> n_p_stage1;
  std::optional<std::size_t> n_p_stage2;
  std::uint64_t seed = 0;
  bool normalized = true;
  bool rescore = false;
  AdapterEndpoint scorer;
  AdapterEndpoint generator;
  AdapterEndpoint trainer;
  /// Passed through to the trainer untouched.
  json hyperparameters = json::object();

  std::size_t objective_count() const { return objective_names.size(); }
  /// Throws ConfigError.
  void validate() const;
};

/// Blocks: dataset, world, preferences, geometry, pipeline, seed. Relative
/// paths resolve against `base`. A world without its own seed gets one
/// derived from the plan seed.
json plan_to_json(const PipelinePlan& plan);
PipelinePlan plan_from_json(const json& j,
                            const std::filesystem::path& base = {});

/// The eleven two-objective preferences [0,1], [0.1,0.9], ..., [1,0].
std::vector<PreferenceVector> default_preference_grid();

struct ScoreOptions {
  BatchOptions batch;
  bool rescore = false;
  /// Completed batches are appended here and picked up again on restart.
  std::optional<std::filesystem::path> partial_path;
  /// Called for each exchange recovered from `partial_path`, in request order.
  std::function<void(const json& request, const json& response)> on_restored;
};

/// Fills in missing rewards through the scorer. Already scored examples are
/// kept unless `rescore`. Order is preserved.
Dataset score_dataset(const Dataset& d, const AdapterFactory& scorer,
                      const ScoreOptions& options = {});

/// Inputs of a generator adapter for one representative model.
struct GeneratorContext {
  std::size_t slot = 0;
  std::size_t preference_index = 0;
  std::filesystem::path train_file;
  const Dataset* training_set = nullptr;
  std::uint64_t seed = 0;
};

struct AdapterSet {
  AdapterFactory scorer;
  std::function<AdapterFactory(const GeneratorContext&)> generator;
  AdapterFactory trainer;
};

/// Resolves the plan's endpoints (toy, subprocess or HTTP).
AdapterSet make_adapters(const PipelinePlan& plan);

using DirectionSelector = std::function<SelectionResult(
    const Dataset& pool, const PreferenceDirection& p, std::size_t count,
    const RewardBounds& b, bool normalized, std::string label)>;

struct RunContext {
  AdapterSet adapters;
  /// When set, adapter calls are answered from this log instead.
  const AdapterLog* replay_log = nullptr;
  /// Direction-based selection; defaults to select_stage1.
  DirectionSelector selector;
  /// Output directory named in trainer requests. Empty means the actual
  /// output directory; replays set it to the recorded one.
  std::filesystem::path logged_root;
};

struct SelectionManifest {
  std::size_t preference_index = 0;
  PreferenceVector preference{1.0};
  int stage = 1;
  std::string pool_label;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::size_t n_p = 0;
  std::string train_file;
  std::vector<std::string> chosen;
  std::vector<double> distances;
};

struct Stage1Record {
  RewardBounds bounds;
  std::size_t n_p = 0;
  std::size_t layers_used = 0;
  std::size_t total_layers = 0;
  std::size_t pareto_size = 0;
  bool exhausted = false;
  std::vector<SelectionManifest> selections;
};

struct AugmentationPool {
  std::size_t slot = 0;
  std::size_t preference_index = 0;
  std::size_t size = 0;
  std::size_t n_p = 0;
  std::size_t layers_used = 0;
  std::size_t pareto_size = 0;
  bool exhausted = false;
};

struct PoolDecision {
  std::size_t preference_index = 0;
  std::size_t pool = 0;
  bool tie = false;
  std::uint64_t seed = 0;
};

struct Stage2Record {
  std::vector<std::size_t> representatives;
  std::size_t prompts_sampled = 0;
  std::size_t n_p = 0;
  std::vector<AugmentationPool> pools;
  std::vector<PoolDecision> matches;
  std::vector<SelectionManifest> selections;
};

struct RunRecord {
  PipelinePlan plan;
  std::optional<Stage1Record> stage1;
  std::optional<Stage2Record> stage2;
  std::map<std::string, std::size_t> adapter_calls;
  std::vector<std::string> warnings;
};

json record_to_json(const RunRecord& r);
RunRecord record_from_json(const json& j);

/// Reads <dir>/record.json. Throws PreconditionError when absent.
RunRecord load_record(const std::filesystem::path& dir);

/// Bounds, Pareto high-quality pool and one training set per preference.
/// Writes stage1/ files, record.json, adapter_log.jsonl and checksums.txt
/// under `out`.
RunRecord run_stage1(const PipelinePlan& plan, const std::filesystem::path& out,
                     const RunContext& ctx);

/// Augmentation through the representative models and per-preference
/// selection from the matched pool. Requires a completed stage 1 in `out`.
RunRecord run_stage2(const PipelinePlan& plan, const std::filesystem::path& out,
                     const RunContext& ctx);

/// Loads the source corpus named by the plan (file or synthetic world).
Dataset load_source_dataset(const PipelinePlan& plan);

struct ReplayReport {
  bool identical = true;
  /// Relative path of the first artifact that differs, if any.
  std::string first_divergence;
  std::vector<std::string> compared;
};

/// Re-executes a recorded run in `scratch` with adapter calls answered from
/// the record's log and compares every checksummed artifact.
ReplayReport replay(const std::filesystem::path& record_dir,
                    const std::filesystem::path& scratch,
                    DirectionSelector selector = {});

/// Normalized-space hypervolume of the per-preference training-set means.
struct StageFronts {
  double stage1_hv = 0.0;
  double stage2_hv = 0.0;
  std::vector<RewardVector> stage1_means;
  std::vector<RewardVector> stage2_means;
};

StageFronts compare_stage_fronts(const std::filesystem::path& record_dir);

/// Plain-text summary: layers used, pool sizes and per-preference distances.
std::string summarize_run(const RunRecord& record);

/// sha256 hex digest.
std::string sha256_hex(const std::string& data);

}  // namespace paretohqd
