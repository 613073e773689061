#include "paretohqd/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>

#include "paretohqd/dataset_io.hpp"

namespace paretohqd {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

// Key-level check of the plan blocks; value checks happen in plan().
void check_plan_blocks(const json& j) {
  static const std::map<std::string, std::vector<std::string_view>> blocks = {
      {"dataset", {"path", "objectives", "objective_count"}},
      {"world", {"shape", "size", "sigma", "profile", "seed"}},
      {"geometry", {"normalized"}},
      {"pipeline",
       {"k", "n_add", "n_p_stage1", "n_p_stage2", "rescore", "scorer", "generator", "trainer",
        "hyperparameters"}},
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto b = blocks.find(it.key());
    if (b == blocks.end()) continue;
    if (!it->is_object()) throw ConfigError(it.key() + " must be an object");
    for (auto kt = it->begin(); kt != it->end(); ++kt) {
      if (std::find(b->second.begin(), b->second.end(), kt.key()) == b->second.end()) {
        throw ConfigError("unknown key '" + kt.key() + "' in " + it.key());
      }
    }
  }
  if (j.contains("pipeline")) {
    for (const char* e : {"scorer", "generator", "trainer"}) {
      if (j["pipeline"].contains(e)) {
        check_keys(j["pipeline"][e],
                   {"mode", "command", "url", "timeout_ms", "batch_size", "retries",
                    "max_in_flight"},
                   std::string("pipeline.") + e);
      }
    }
  }
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

void apply_env_overrides(json& plan_blocks, const EnvLookup& env) {
  if (!env) return;
  for (const char* endpoint : {"scorer", "generator", "trainer"}) {
    std::string upper(endpoint);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const auto url = env("PARETOHQD_" + upper + "_URL");
    const auto cmd = env("PARETOHQD_" + upper + "_CMD");
    if (url && cmd) {
      throw ConfigError("both PARETOHQD_" + upper + "_URL and PARETOHQD_" + upper +
                        "_CMD are set");
    }
    if (!url && !cmd) continue;
    json& e = plan_blocks["pipeline"][endpoint];
    if (url) {
      e["mode"] = "http";
      e["url"] = *url;
    } else {
      e["mode"] = "subprocess";
      e["command"] = *cmd;
    }
  }
}

CliConfig config_from_json(const json& j, const fs::path& base_dir, const EnvLookup& env) {
  check_keys(j,
             {"dataset", "world", "preferences", "geometry", "pipeline", "seed", "metrics",
              "output"},
             "config");
  CliConfig c;
  c.base_dir = base_dir;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "metrics" && it.key() != "output") c.plan_blocks[it.key()] = it.value();
    }
    check_plan_blocks(c.plan_blocks);
    if (j.contains("metrics")) {
      const auto& m = j["metrics"];
      check_keys(m, {"bins", "hv_reference", "monte_carlo_samples"}, "metrics");
      if (m.contains("bins")) c.metrics.bins = m["bins"].get<std::size_t>();
      if (m.contains("hv_reference")) {
        c.metrics.hv_reference = m["hv_reference"].get<std::vector<double>>();
      }
      if (m.contains("monte_carlo_samples")) {
        c.metrics.monte_carlo_samples = m["monte_carlo_samples"].get<std::size_t>();
      }
      if (c.metrics.bins == 0) throw ConfigError("metrics.bins must be positive");
    }
    if (j.contains("output")) {
      const auto& o = j["output"];
      check_keys(o, {"dir", "verbose"}, "output");
      if (o.contains("dir")) {
        fs::path p(o["dir"].get<std::string>());
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.out_dir = p.lexically_normal().string();
      }
      if (o.contains("verbose")) c.verbose = o["verbose"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  apply_env_overrides(c.plan_blocks, env);
  return c;
}

CliConfig load_config(const fs::path& path, const EnvLookup& env) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' not found");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path(), env);
}

PipelinePlan CliConfig::plan() const { return plan_from_json(plan_blocks, base_dir); }

}  // namespace paretohqd
