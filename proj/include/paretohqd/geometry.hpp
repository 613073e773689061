#pragma once

#include <span>

#include "paretohqd/core.hpp"

namespace paretohqd {

/// Componentwise minimum and maximum rewards over a corpus.
struct RewardBounds {
  RewardVector min;
  RewardVector max;

  std::size_t size() const { return min.size(); }
};

/// Ray from the ideal point `origin` (r^max) through the compromise point
/// of `preference`.
struct PreferenceDirection {
  RewardVector origin;
  RewardVector compromise;
  PreferenceVector preference;
};

RewardBounds compute_bounds(const Dataset& d);
RewardBounds compute_bounds(std::span<const RewardVector> points);

/// Maps v into the unit box spanned by b. A degenerate dimension
/// (max == min) maps to 0.5.
RewardVector normalize(const RewardVector& v, const RewardBounds& b);

/// W = r^min + w * (r^max - r^min), elementwise.
RewardVector compromise_point(const PreferenceVector& w, const RewardBounds& b);

PreferenceDirection build_direction(const PreferenceVector& w,
                                    const RewardBounds& b);

/// Euclidean distance from `point` to {origin + t (through - origin), t >= 0}.
/// A zero direction degrades to the distance to `origin`.
double distance_to_ray(std::span<const double> point,
                       std::span<const double> origin,
                       std::span<const double> through);

/// Distance from v to the preference ray. With `normalized`, v and both ray
/// points are first mapped through normalize(., b).
double distance_to_direction(const RewardVector& v, const PreferenceDirection& p,
                             const RewardBounds& b, bool normalized = true);

/// Precomputed ray in the chosen geometry space, for scoring many points.
class DirectionGeometry {
 public:
  DirectionGeometry(const PreferenceDirection& p, const RewardBounds& b,
                    bool normalized);
  double distance(const RewardVector& v) const;

 private:
  RewardBounds bounds_;
  bool normalized_;
  std::vector<double> origin_;
  std::vector<double> through_;
};

}  // namespace paretohqd
