#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "paretohqd/adapters.hpp"
#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"

namespace paretohqd::synthetic {

enum class FrontShape { kConvexCircle, kConcaveSqrt, kLinear };
enum class ImbalanceProfile { kUniform, kCenterHeavy };

std::string_view to_string(FrontShape s);
std::string_view to_string(ImbalanceProfile p);
FrontShape front_shape_from_string(std::string_view s);
ImbalanceProfile imbalance_profile_from_string(std::string_view s);

/// Two-objective toy corpus.
///
/// - kUniform: every example sits on the front at an evenly spaced first
///   coordinate, pushed inward by |N(0, sigma)| in each coordinate.
/// - kCenterHeavy: a tenth of the examples are such front points; the rest
///   are drawn from a Gaussian around the middle of the feasible region.
struct WorldSpec {
  FrontShape shape = FrontShape::kConcaveSqrt;
  std::size_t size = 2000;
  double sigma = 0.02;
  ImbalanceProfile profile = ImbalanceProfile::kUniform;
  std::uint64_t seed = 0;
};

json world_spec_to_json(const WorldSpec& w);
WorldSpec world_spec_from_json(const json& j);

using Point = std::array<double, 2>;

/// Second coordinate of the front at first coordinate t in [0, 1]:
/// sqrt(1 - t^2), 1 - sqrt(t) or 1 - t.
double front_height(FrontShape shape, double t);

/// True when p is inside [0,1]^2 and on or below the front.
bool is_feasible(FrontShape shape, const Point& p);

/// Nearest feasible point: clamp to the unit box, then project onto the
/// front when the point lies above it.
Point clip_to_feasible(FrontShape shape, const Point& p);

/// Normalized first coordinate in [0.2, 0.8].
bool in_interior_band(const RewardVector& v, const RewardBounds& b);

Dataset generate_world(const WorldSpec& spec);

/// Response text carrying a feature point: "toy-point <x> <y>" with six
/// decimals each.
std::string encode_point(const Point& p);
std::optional<Point> decode_point(std::string_view text);

/// Decodes responses and returns the clipped point as the reward vector.
class ToyScorer {
 public:
  explicit ToyScorer(FrontShape shape) : shape_(shape) {}
  /// Wire-level scorer; undecodable responses throw DataError naming the id.
  json operator()(const json& request) const;
  RewardVector score(std::string_view id, std::string_view response) const;

 private:
  FrontShape shape_;
};

/// Stands in for a model fine-tuned on `training_set`: responses encode a
/// point drawn from N(mean, covariance + floor) of the set's rewards. Each
/// response depends only on (seed, request id).
class ToyGenerator {
 public:
  static constexpr double kCovarianceFloor = 1e-4;

  ToyGenerator(const Dataset& training_set, std::uint64_t seed);

  json operator()(const json& request) const;
  Point sample(std::string_view id) const;

  const Point& mean() const { return mean_; }
  /// Lower-triangular Cholesky factor of the floored covariance.
  const std::array<double, 3>& cholesky() const { return chol_; }

 private:
  Point mean_{};
  std::array<double, 3> chol_{};
  std::uint64_t seed_;
};

}  // namespace paretohqd::synthetic
