#include "paretohqd/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace paretohqd {

RewardBounds compute_bounds(std::span<const RewardVector> points) {
  if (points.empty()) throw DataError("cannot compute bounds of an empty dataset");
  std::vector<double> lo(points.front().begin(), points.front().end());
  std::vector<double> hi = lo;
  for (const auto& p : points) {
    require_same_arity(p.size(), lo.size(), "compute_bounds");
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  return {RewardVector(std::move(lo)), RewardVector(std::move(hi))};
}

RewardBounds compute_bounds(const Dataset& d) {
  if (d.empty()) throw DataError("cannot compute bounds of an empty dataset");
  return compute_bounds(d.reward_matrix());
}

RewardVector normalize(const RewardVector& v, const RewardBounds& b) {
  require_same_arity(v.size(), b.size(), "normalize");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double range = b.max[i] - b.min[i];
    out[i] = range > 0.0 ? (v[i] - b.min[i]) / range : 0.5;
  }
  return RewardVector(std::move(out));
}

RewardVector compromise_point(const PreferenceVector& w, const RewardBounds& b) {
  require_same_arity(w.size(), b.size(), "compromise_point");
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = b.min[i] + w[i] * (b.max[i] - b.min[i]);
  }
  return RewardVector(std::move(out));
}

PreferenceDirection build_direction(const PreferenceVector& w,
                                    const RewardBounds& b) {
  return {b.max, compromise_point(w, b), w};
}

double distance_to_ray(std::span<const double> point,
                       std::span<const double> origin,
                       std::span<const double> through) {
  require_same_arity(point.size(), origin.size(), "distance_to_ray");
  require_same_arity(point.size(), through.size(), "distance_to_ray");
  double dd = 0.0;
  double vd = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double d = through[i] - origin[i];
    dd += d * d;
    vd += (point[i] - origin[i]) * d;
  }
  const double t = dd > 0.0 ? std::max(0.0, vd / dd) : 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double foot = origin[i] + t * (through[i] - origin[i]);
    sq += (point[i] - foot) * (point[i] - foot);
  }
  return std::sqrt(sq);
}

double distance_to_direction(const RewardVector& v, const PreferenceDirection& p,
                             const RewardBounds& b, bool normalized) {
  return DirectionGeometry(p, b, normalized).distance(v);
}

DirectionGeometry::DirectionGeometry(const PreferenceDirection& p,
                                     const RewardBounds& b, bool normalized)
    : bounds_(b), normalized_(normalized) {
  require_same_arity(p.origin.size(), p.compromise.size(), "PreferenceDirection");
  require_same_arity(p.origin.size(), b.size(), "PreferenceDirection");
  const RewardVector o = normalized ? normalize(p.origin, b) : p.origin;
  const RewardVector c = normalized ? normalize(p.compromise, b) : p.compromise;
  origin_.assign(o.begin(), o.end());
  through_.assign(c.begin(), c.end());
}

double DirectionGeometry::distance(const RewardVector& v) const {
  require_same_arity(v.size(), origin_.size(), "distance_to_direction");
  if (!normalized_) return distance_to_ray(v.values(), origin_, through_);
  const RewardVector n = normalize(v, bounds_);
  return distance_to_ray(n.values(), origin_, through_);
}

}  // namespace paretohqd
