#include "paretohqd/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "paretohqd/rng.hpp"

namespace paretohqd {

namespace {

// Smallest `count` entries by (key, index), or largest keys when
// `descending`. Index always ascending on ties.
std::vector<std::size_t> top_by_key(const std::vector<double>& keys,
                                    std::size_t count, bool descending) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  count = std::min(count, order.size());
  auto less = [&](std::size_t a, std::size_t b) {
    if (keys[a] != keys[b]) return descending ? keys[a] > keys[b] : keys[a] < keys[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                    order.end(), less);
  order.resize(count);
  return order;
}

SelectionResult make_result(const Dataset& pool, const PreferenceVector& w,
                            const std::vector<double>& keys,
                            const std::vector<std::size_t>& picked,
                            std::string label) {
  SelectionResult r{w, {}, picked, {}, std::move(label)};
  r.chosen.reserve(picked.size());
  r.scores.reserve(picked.size());
  for (std::size_t i : picked) {
    r.chosen.push_back(pool[i].id);
    r.scores.push_back(keys[i]);
  }
  return r;
}

}  // namespace

SelectionResult select_stage1(const Dataset& pool, const PreferenceDirection& p,
                              std::size_t k, const RewardBounds& b,
                              bool normalized, std::string source_label) {
  if (k == 0) throw ConfigError("k must be positive");
  if (pool.empty()) throw DataError("selection pool is empty");
  const DirectionGeometry ray(p, b, normalized);
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) dist[i] = ray.distance(pool.rewards_at(i));
  return make_result(pool, p.preference, dist, top_by_key(dist, k, false),
                     std::move(source_label));
}

SelectionResult select_stage2(const Dataset& pool, const PreferenceDirection& p,
                              std::size_t k, const RewardBounds& b,
                              bool normalized, std::string source_label) {
  if (k == 0) throw ConfigError("k must be positive");
  return select_stage1(pool, p, (k + 1) / 2, b, normalized, std::move(source_label));
}

SelectionResult select_ls_topk(const Dataset& pool, const PreferenceVector& w,
                               std::size_t k, const RewardBounds& b,
                               bool normalized, std::string source_label) {
  if (k == 0) throw ConfigError("k must be positive");
  if (pool.empty()) throw DataError("selection pool is empty");
  require_same_arity(w.size(), pool.objective_count(), "select_ls_topk");
  std::vector<double> value(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const RewardVector r = normalized ? normalize(pool.rewards_at(i), b) : pool.rewards_at(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += w[j] * r[j];
    value[i] = s;
  }
  return make_result(pool, w, value, top_by_key(value, k, true), std::move(source_label));
}

std::vector<std::size_t> representative_preferences(
    std::span<const PreferenceVector> all, std::size_t objective_count) {
  if (all.empty()) throw ConfigError("at least one preference is required");
  std::vector<std::vector<double>> targets;
  for (std::size_t j = 0; j < objective_count; ++j) {
    std::vector<double> e(objective_count, 0.0);
    e[j] = 1.0;
    targets.push_back(std::move(e));
  }
  targets.emplace_back(objective_count, 1.0 / static_cast<double>(objective_count));

  std::vector<std::size_t> out;
  for (const auto& t : targets) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < all.size(); ++i) {
      require_same_arity(all[i].size(), objective_count, "representative_preferences");
      double sq = 0.0;
      for (std::size_t j = 0; j < objective_count; ++j) {
        sq += (all[i][j] - t[j]) * (all[i][j] - t[j]);
      }
      if (sq < best_d) {
        best_d = sq;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

PoolMatch match_stage2_pool(const PreferenceVector& w, std::uint64_t seed) {
  const double top = *std::max_element(w.weights().begin(), w.weights().end());
  std::vector<std::size_t> tied;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (top - w[j] <= kTolerance) tied.push_back(j);
  }
  if (tied.size() == w.size()) return {w.size(), false};
  if (tied.size() == 1) return {tied.front(), false};
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return {tied[pick(rng)], true};
}

void write_selection(std::ostream& out, const SelectionResult& r) {
  for (std::size_t i = 0; i < r.chosen.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = r.chosen[i];
    j["distance"] = r.scores[i];
    out << j.dump() << '\n';
  }
}

}  // namespace paretohqd
