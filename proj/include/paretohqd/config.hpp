#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paretohqd/core.hpp"
#include "paretohqd/pipeline.hpp"

namespace paretohqd {

struct MetricsConfig {
  std::size_t bins = 10;
  /// Raw-space hypervolume reference; origin of normalized space when unset.
  std::optional<std::vector<double>> hv_reference;
  /// Monte Carlo samples for the hypervolume cross-check; 0 disables it.
  std::size_t monte_carlo_samples = 0;
};

/// Top-level config file. The plan blocks (dataset, world, preferences,
/// geometry, pipeline, seed) are kept as JSON and turned into a plan only by
/// commands that need one, so e.g. `evaluate` works without a dataset.
struct CliConfig {
  json plan_blocks = json::object();
  std::filesystem::path base_dir;
  std::string out_dir;
  bool verbose = false;
  MetricsConfig metrics;

  /// Validated plan built from `plan_blocks`.
  PipelinePlan plan() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment.
EnvLookup process_env();

/// Parses a config document and applies `env` endpoint overrides. Unknown
/// keys are a ConfigError; plan blocks are checked in full by plan().
CliConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {},
                           const EnvLookup& env = {});
CliConfig load_config(const std::filesystem::path& path, const EnvLookup& env = {});

/// PARETOHQD_{SCORER,GENERATOR,TRAINER}_{URL,CMD} replace the matching
/// endpoint's mode and address. Nothing else can be set from the environment.
void apply_env_overrides(json& plan_blocks, const EnvLookup& env);

}  // namespace paretohqd
