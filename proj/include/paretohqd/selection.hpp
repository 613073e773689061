#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"

namespace paretohqd {

/// Examples drawn from one pool for one preference. For direction-based
/// selection `scores` are ray distances, non-decreasing; for the scalarized
/// baseline they are weighted sums, non-increasing.
struct SelectionResult {
  PreferenceVector preference;
  std::vector<std::string> chosen;
  std::vector<std::size_t> pool_indices;
  std::vector<double> scores;
  std::string source_label;
};

/// The k pool examples nearest to the preference ray; ties by pool index.
SelectionResult select_stage1(const Dataset& pool, const PreferenceDirection& p,
                              std::size_t k, const RewardBounds& b,
                              bool normalized = true,
                              std::string source_label = "pareto");

/// select_stage1 with ceil(k / 2) examples.
SelectionResult select_stage2(const Dataset& pool, const PreferenceDirection& p,
                              std::size_t k, const RewardBounds& b,
                              bool normalized = true,
                              std::string source_label = "add-pareto");

/// Linear-scalarization baseline: the k examples with the largest w . r.
SelectionResult select_ls_topk(const Dataset& pool, const PreferenceVector& w,
                               std::size_t k, const RewardBounds& b,
                               bool normalized = true,
                               std::string source_label = "ls-topk");

/// Indices (into `all`) nearest to e_1..e_M and then to the uniform vector.
/// The same index may appear several times.
std::vector<std::size_t> representative_preferences(
    std::span<const PreferenceVector> all, std::size_t objective_count);

struct PoolMatch {
  /// 0..M-1 for the objective-extreme pools, M for the unbiased pool.
  std::size_t pool = 0;
  /// More than one (but not all) components shared the maximum.
  bool tie = false;
};

/// Pool whose representative emphasises w's largest weight. All weights
/// equal selects the unbiased pool; a partial tie picks uniformly among the
/// tied objectives using `seed`.
PoolMatch match_stage2_pool(const PreferenceVector& w, std::uint64_t seed);

/// `{"id":...,"distance":...}` lines.
void write_selection(std::ostream& out, const SelectionResult& r);

}  // namespace paretohqd
