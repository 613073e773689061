#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"

namespace paretohqd {

/// Maximization dominance: a is no worse everywhere and better somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);
inline bool dominates(const RewardVector& a, const RewardVector& b) {
  return dominates(a.values(), b.values());
}

/// Successive non-dominated fronts. layers[0] is the Pareto-optimal set.
/// Indices inside each layer are ascending.
struct ParetoLayering {
  std::vector<std::vector<std::size_t>> layers;
  /// 1-based layer of every input index.
  std::vector<std::size_t> layer_of;

  std::size_t layer_count() const { return layers.size(); }
};

ParetoLayering layer_fronts(std::span<const RewardVector> points);
/// Throws DataError on an empty or partially scored dataset.
ParetoLayering layer_fronts(const Dataset& d);

/// Union of the first `layers_used` fronts; smallest such union of size
/// >= n_p, or everything when the dataset is smaller than n_p.
struct ParetoSubset {
  Dataset data;
  /// Positions of `data`'s examples in the source dataset, ascending.
  std::vector<std::size_t> source_indices;
  std::size_t layers_used = 0;
  std::size_t total_layers = 0;
  /// Set when the source held fewer than n_p examples.
  bool exhausted = false;
};

ParetoSubset build_pareto_hq(const Dataset& d, std::size_t n_p);

/// ceil(N * k_t / 2) with k_t = k (stage 1).
std::size_t stage1_pareto_threshold(std::size_t preference_count, std::size_t k);
/// ceil(N * (k/2) / 2) (stage 2).
std::size_t stage2_pareto_threshold(std::size_t preference_count, std::size_t k);

/// Counts of examples per cell of a regular grid over normalized rewards.
struct Histogram {
  std::size_t bins_per_axis = 0;
  std::size_t dims = 0;
  /// Row-major, first objective varies slowest.
  std::vector<std::size_t> counts;

  std::size_t count(std::span<const std::size_t> cell) const;
  std::size_t total() const;
};

Histogram imbalance_histogram(const Dataset& d, std::size_t bins_per_axis,
                              const RewardBounds& b);

/// `{"id":...,"layer":L}` per example, dataset order.
void write_layer_assignment(std::ostream& out, const Dataset& d,
                            const ParetoLayering& layering);

/// Two objectives: a grid whose header row holds the second objective's
/// lower bin edges and whose first column holds the first objective's.
/// More objectives: one row per cell with lower edges and the count.
void write_histogram_csv(std::ostream& out, const Histogram& h,
                         const std::vector<std::string>& objective_names);

}  // namespace paretohqd
