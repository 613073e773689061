#include "paretohqd/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace paretohqd {

bool dominates(std::span<const double> a, std::span<const double> b) {
  require_same_arity(a.size(), b.size(), "dominates");
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strictly_better = true;
  }
  return strictly_better;
}

namespace {

// Two objectives: after sorting by (r1, r2) descending, a point's dominators
// all come earlier, and the last member added to each front has that front's
// largest r2. The "front L dominates p" predicate is monotone in L, so a
// binary search over fronts places each point.
std::vector<std::size_t> assign_layers_2d(std::span<const RewardVector> pts) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a][0] != pts[b][0]) return pts[a][0] > pts[b][0];
    if (pts[a][1] != pts[b][1]) return pts[a][1] > pts[b][1];
    return a < b;
  });
  std::vector<std::size_t> layer(pts.size());
  std::vector<std::size_t> last;  // last member of each front
  for (std::size_t idx : order) {
    const auto& p = pts[idx];
    auto front_dominates = [&](std::size_t l) {
      const auto& q = pts[last[l]];
      return q[1] > p[1] || (q[1] == p[1] && q[0] > p[0]);
    };
    std::size_t lo = 0;
    std::size_t hi = last.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (front_dominates(mid)) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo == last.size()) {
      last.push_back(idx);
    } else {
      last[lo] = idx;
    }
    layer[idx] = lo;
  }
  return layer;
}

// Fast non-dominated sort: dominance counts plus dominated lists.
std::vector<std::size_t> assign_layers_general(std::span<const RewardVector> pts) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> dominated_count(n, 0);
  std::vector<std::vector<std::size_t>> dominated(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(pts[i], pts[j])) {
        dominated[i].push_back(j);
        ++dominated_count[j];
      } else if (dominates(pts[j], pts[i])) {
        dominated[j].push_back(i);
        ++dominated_count[i];
      }
    }
  }
  std::vector<std::size_t> layer(n);
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    if (dominated_count[i] == 0) current.push_back(i);
  }
  std::size_t level = 0;
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      layer[i] = level;
      for (std::size_t j : dominated[i]) {
        if (--dominated_count[j] == 0) next.push_back(j);
      }
    }
    current = std::move(next);
    ++level;
  }
  return layer;
}

}  // namespace

ParetoLayering layer_fronts(std::span<const RewardVector> points) {
  if (points.empty()) throw DataError("cannot layer an empty dataset");
  const std::size_t m = points.front().size();
  for (const auto& p : points) require_same_arity(p.size(), m, "layer_fronts");

  const auto layer = m == 2 ? assign_layers_2d(points) : assign_layers_general(points);
  ParetoLayering out;
  out.layer_of.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (layer[i] >= out.layers.size()) out.layers.resize(layer[i] + 1);
    out.layers[layer[i]].push_back(i);
    out.layer_of[i] = layer[i] + 1;
  }
  return out;
}

ParetoLayering layer_fronts(const Dataset& d) {
  return layer_fronts(d.reward_matrix());
}

ParetoSubset build_pareto_hq(const Dataset& d, std::size_t n_p) {
  if (n_p == 0) throw ConfigError("N_p must be positive");
  const ParetoLayering layering = layer_fronts(d);
  ParetoSubset out{Dataset(d.objective_names()), {}, 0, layering.layer_count(), false};
  for (const auto& front : layering.layers) {
    if (out.source_indices.size() >= n_p) break;
    out.source_indices.insert(out.source_indices.end(), front.begin(), front.end());
    ++out.layers_used;
  }
  out.exhausted = out.source_indices.size() < n_p;
  std::sort(out.source_indices.begin(), out.source_indices.end());
  out.data = d.subset(out.source_indices);
  return out;
}

std::size_t stage1_pareto_threshold(std::size_t preference_count, std::size_t k) {
  return (preference_count * k + 1) / 2;
}

std::size_t stage2_pareto_threshold(std::size_t preference_count, std::size_t k) {
  return (preference_count * k + 3) / 4;
}

std::size_t Histogram::count(std::span<const std::size_t> cell) const {
  require_same_arity(cell.size(), dims, "Histogram::count");
  std::size_t flat = 0;
  for (std::size_t c : cell) {
    if (c >= bins_per_axis) throw DataError("histogram cell out of range");
    flat = flat * bins_per_axis + c;
  }
  return counts[flat];
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram imbalance_histogram(const Dataset& d, std::size_t bins_per_axis,
                              const RewardBounds& b) {
  if (d.empty()) throw DataError("cannot histogram an empty dataset");
  if (bins_per_axis == 0) throw ConfigError("bins per axis must be positive");
  require_same_arity(d.objective_count(), b.size(), "imbalance_histogram");
  Histogram h;
  h.bins_per_axis = bins_per_axis;
  h.dims = d.objective_count();
  std::size_t cells = 1;
  for (std::size_t i = 0; i < h.dims; ++i) cells *= bins_per_axis;
  h.counts.assign(cells, 0);
  const double bins = static_cast<double>(bins_per_axis);
  for (std::size_t e = 0; e < d.size(); ++e) {
    const RewardVector n = normalize(d.rewards_at(e), b);
    std::size_t flat = 0;
    for (double x : n) {
      const double scaled = std::floor(x * bins);
      const auto bin = static_cast<std::size_t>(std::clamp(scaled, 0.0, bins - 1.0));
      flat = flat * bins_per_axis + bin;
    }
    ++h.counts[flat];
  }
  return h;
}

void write_layer_assignment(std::ostream& out, const Dataset& d,
                            const ParetoLayering& layering) {
  require_same_arity(d.size(), layering.layer_of.size(), "layer assignment");
  for (std::size_t i = 0; i < d.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = d[i].id;
    j["layer"] = layering.layer_of[i];
    out << j.dump() << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& h,
                         const std::vector<std::string>& objective_names) {
  require_same_arity(objective_names.size(), h.dims, "histogram csv");
  const auto edge = [&](std::size_t i) {
    return static_cast<double>(i) / static_cast<double>(h.bins_per_axis);
  };
  if (h.dims == 2) {
    out << objective_names[0] << '\\' << objective_names[1];
    for (std::size_t j = 0; j < h.bins_per_axis; ++j) out << ',' << edge(j);
    out << '\n';
    for (std::size_t i = 0; i < h.bins_per_axis; ++i) {
      out << edge(i);
      for (std::size_t j = 0; j < h.bins_per_axis; ++j) {
        out << ',' << h.counts[i * h.bins_per_axis + j];
      }
      out << '\n';
    }
    return;
  }
  for (const auto& name : objective_names) out << name << "_lo,";
  out << "count\n";
  std::vector<std::size_t> cell(h.dims, 0);
  for (std::size_t flat = 0; flat < h.counts.size(); ++flat) {
    std::size_t rest = flat;
    for (std::size_t d = h.dims; d-- > 0;) {
      cell[d] = rest % h.bins_per_axis;
      rest /= h.bins_per_axis;
    }
    for (std::size_t c : cell) out << edge(c) << ',';
    out << h.counts[flat] << '\n';
  }
}

}  // namespace paretohqd
