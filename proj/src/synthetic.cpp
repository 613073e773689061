#include "paretohqd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "paretohqd/rng.hpp"

namespace paretohqd::synthetic {

namespace {

// Responses carry six decimals, so feasibility is judged at that precision.
constexpr double kEncodingTolerance = 1e-6;
constexpr std::string_view kPointPrefix = "toy-point";

double diagonal_front_coordinate(FrontShape shape) {
  switch (shape) {
    case FrontShape::kConvexCircle:
      return 1.0 / std::sqrt(2.0);
    case FrontShape::kConcaveSqrt:
      return (3.0 - std::sqrt(5.0)) / 2.0;  // t = 1 - sqrt(t)
    case FrontShape::kLinear:
      return 0.5;
  }
  return 0.5;
}

Point project_onto_sqrt_front(const Point& p) {
  // Front points are (s^2, 1 - s) for s in [0, 1].
  auto dist2 = [&](double s) {
    const double dx = s * s - p[0];
    const double dy = 1.0 - s - p[1];
    return dx * dx + dy * dy;
  };
  constexpr int kGrid = 2000;
  double best_s = 0.0;
  double best = dist2(0.0);
  for (int i = 1; i <= kGrid; ++i) {
    const double s = static_cast<double>(i) / kGrid;
    if (const double d = dist2(s); d < best) {
      best = d;
      best_s = s;
    }
  }
  // Newton on the derivative 4s^3 + (2 - 4x)s - 2(1 - y).
  double s = best_s;
  for (int it = 0; it < 20; ++it) {
    const double g = 4 * s * s * s + (2 - 4 * p[0]) * s - 2 * (1 - p[1]);
    const double h = 12 * s * s + (2 - 4 * p[0]);
    if (h <= 0) break;
    const double next = std::clamp(s - g / h, 0.0, 1.0);
    if (std::abs(next - s) < 1e-15) break;
    s = next;
  }
  if (dist2(s) < best) best_s = s;
  return {best_s * best_s, 1.0 - best_s};
}

std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string_view to_string(FrontShape s) {
  switch (s) {
    case FrontShape::kConvexCircle:
      return "convex_circle";
    case FrontShape::kConcaveSqrt:
      return "concave_sqrt";
    case FrontShape::kLinear:
      return "linear";
  }
  return "linear";
}

std::string_view to_string(ImbalanceProfile p) {
  return p == ImbalanceProfile::kUniform ? "uniform" : "center_heavy";
}

FrontShape front_shape_from_string(std::string_view s) {
  if (s == "convex_circle") return FrontShape::kConvexCircle;
  if (s == "concave_sqrt") return FrontShape::kConcaveSqrt;
  if (s == "linear") return FrontShape::kLinear;
  throw ConfigError("unknown front shape '" + std::string(s) + "'");
}

ImbalanceProfile imbalance_profile_from_string(std::string_view s) {
  if (s == "uniform") return ImbalanceProfile::kUniform;
  if (s == "center_heavy") return ImbalanceProfile::kCenterHeavy;
  throw ConfigError("unknown imbalance profile '" + std::string(s) + "'");
}

json world_spec_to_json(const WorldSpec& w) {
  return {{"shape", to_string(w.shape)},
          {"size", w.size},
          {"sigma", w.sigma},
          {"profile", to_string(w.profile)},
          {"seed", w.seed}};
}

WorldSpec world_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("world spec must be an object");
  WorldSpec w;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    if (key == "shape") {
      w.shape = front_shape_from_string(it->get<std::string>());
    } else if (key == "size") {
      w.size = it->get<std::size_t>();
    } else if (key == "sigma") {
      w.sigma = it->get<double>();
    } else if (key == "profile") {
      w.profile = imbalance_profile_from_string(it->get<std::string>());
    } else if (key == "seed") {
      w.seed = it->get<std::uint64_t>();
    } else {
      throw ConfigError("unknown world key '" + key + "'");
    }
  }
  if (w.size == 0) throw ConfigError("world size must be at least 1");
  if (!std::isfinite(w.sigma) || w.sigma < 0) throw ConfigError("world sigma must be finite and >= 0");
  return w;
}

double front_height(FrontShape shape, double t) {
  t = std::clamp(t, 0.0, 1.0);
  switch (shape) {
    case FrontShape::kConvexCircle:
      return std::sqrt(std::max(0.0, 1.0 - t * t));
    case FrontShape::kConcaveSqrt:
      return 1.0 - std::sqrt(t);
    case FrontShape::kLinear:
      return 1.0 - t;
  }
  return 0.0;
}

bool is_feasible(FrontShape shape, const Point& p) {
  const double tol = kEncodingTolerance;
  if (p[0] < -tol || p[0] > 1 + tol || p[1] < -tol || p[1] > 1 + tol) return false;
  return p[1] <= front_height(shape, p[0]) + tol;
}

Point clip_to_feasible(FrontShape shape, const Point& p) {
  Point q{std::clamp(p[0], 0.0, 1.0), std::clamp(p[1], 0.0, 1.0)};
  if (is_feasible(shape, q)) return q;
  switch (shape) {
    case FrontShape::kConvexCircle: {
      const double r = std::hypot(q[0], q[1]);
      return {q[0] / r, q[1] / r};
    }
    case FrontShape::kConcaveSqrt:
      return project_onto_sqrt_front(q);
    case FrontShape::kLinear: {
      const double t = std::clamp((q[0] - q[1] + 1.0) / 2.0, 0.0, 1.0);
      return {t, 1.0 - t};
    }
  }
  return q;
}

bool in_interior_band(const RewardVector& v, const RewardBounds& b) {
  const double x = normalize(v, b)[0];
  return x >= 0.2 && x <= 0.8;
}

std::string encode_point(const Point& p) {
  return std::string(kPointPrefix) + " " + format_fixed6(p[0]) + " " + format_fixed6(p[1]);
}

std::optional<Point> decode_point(std::string_view text) {
  const auto at = text.find(kPointPrefix);
  if (at == std::string_view::npos) return std::nullopt;
  std::string rest(text.substr(at + kPointPrefix.size()));
  double x = 0;
  double y = 0;
  int consumed = 0;
  if (std::sscanf(rest.c_str(), " %lf %lf%n", &x, &y, &consumed) != 2) return std::nullopt;
  if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  return Point{x, y};
}

Dataset generate_world(const WorldSpec& spec) {
  Dataset d(std::vector<std::string>{"r1", "r2"});
  std::mt19937_64 rng = make_rng(spec.seed, "world");
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n_front = spec.profile == ImbalanceProfile::kUniform
                                  ? spec.size
                                  : std::max<std::size_t>(1, spec.size / 10);
  const double diag = diagonal_front_coordinate(spec.shape);
  const Point bulk_center{0.5 * diag, 0.5 * diag};
  const double bulk_sd = 0.5 * diag;

  std::vector<Point> points;
  points.reserve(spec.size);
  for (std::size_t i = 0; i < n_front; ++i) {
    const double t = n_front == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n_front - 1);
    Point p{t, front_height(spec.shape, t)};
    p[0] -= std::abs(spec.sigma * noise(rng));
    p[1] -= std::abs(spec.sigma * noise(rng));
    points.push_back(clip_to_feasible(spec.shape, p));
  }
  while (points.size() < spec.size) {
    Point p{};
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      p = {bulk_center[0] + bulk_sd * noise(rng), bulk_center[1] + bulk_sd * noise(rng)};
      accepted = p[0] >= 0 && p[1] >= 0 && is_feasible(spec.shape, p);
    }
    points.push_back(clip_to_feasible(spec.shape, p));
  }

  char id[32];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(id, sizeof(id), "w%06zu", i);
    ScoredExample ex;
    ex.id = id;
    ex.prompt = std::string("Toy prompt for example ") + id + ".";
    ex.response = encode_point(points[i]);
    const Point stored = *decode_point(ex.response);
    ex.rewards = RewardVector{stored[0], stored[1]};
    d.add(std::move(ex));
  }
  return d;
}

RewardVector ToyScorer::score(std::string_view id, std::string_view response) const {
  const auto p = decode_point(response);
  if (!p) throw DataError("undecodable toy response for id '" + std::string(id) + "'");
  const Point q = clip_to_feasible(shape_, *p);
  return RewardVector{q[0], q[1]};
}

json ToyScorer::operator()(const json& request) const {
  const auto id = request.at("id").get<std::string>();
  const RewardVector r = score(id, request.at("response").get<std::string>());
  return {{"id", id}, {"rewards", std::vector<double>(r.begin(), r.end())}};
}

ToyGenerator::ToyGenerator(const Dataset& training_set, std::uint64_t seed)
    : seed_(seed) {
  if (training_set.empty()) throw DataError("toy generator needs a nonempty training set");
  require_same_arity(training_set.objective_count(), 2, "toy generator");
  const double n = static_cast<double>(training_set.size());
  for (std::size_t i = 0; i < training_set.size(); ++i) {
    const auto& r = training_set.rewards_at(i);
    mean_[0] += r[0] / n;
    mean_[1] += r[1] / n;
  }
  double sxx = 0;
  double sxy = 0;
  double syy = 0;
  for (std::size_t i = 0; i < training_set.size(); ++i) {
    const auto& r = training_set.rewards_at(i);
    const double dx = r[0] - mean_[0];
    const double dy = r[1] - mean_[1];
    sxx += dx * dx / n;
    sxy += dx * dy / n;
    syy += dy * dy / n;
  }
  // Clamp eigenvalues of the 2x2 covariance at the floor.
  const double tr = sxx + syy;
  const double det_term = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) / 4 + sxy * sxy));
  const double l1 = tr / 2 + det_term;
  const double l2 = tr / 2 - det_term;
  double vx = 1.0;
  double vy = 0.0;
  if (std::abs(sxy) > 0) {
    vx = l1 - syy;
    vy = sxy;
  } else if (syy > sxx) {
    vx = 0.0;
    vy = 1.0;
  }
  const double norm = std::hypot(vx, vy);
  vx /= norm;
  vy /= norm;
  const double e1 = std::max(l1, kCovarianceFloor);
  const double e2 = std::max(l2, kCovarianceFloor);
  // C = e1 v v^T + e2 u u^T with u = (-vy, vx).
  const double cxx = e1 * vx * vx + e2 * vy * vy;
  const double cxy = (e1 - e2) * vx * vy;
  const double cyy = e1 * vy * vy + e2 * vx * vx;
  const double l00 = std::sqrt(cxx);
  const double l10 = cxy / l00;
  const double l11 = std::sqrt(std::max(0.0, cyy - l10 * l10));
  chol_ = {l00, l10, l11};
}

Point ToyGenerator::sample(std::string_view id) const {
  std::mt19937_64 rng = make_rng(seed_, id);
  std::normal_distribution<double> z(0.0, 1.0);
  const double z0 = z(rng);
  const double z1 = z(rng);
  return {mean_[0] + chol_[0] * z0, mean_[1] + chol_[1] * z0 + chol_[2] * z1};
}

json ToyGenerator::operator()(const json& request) const {
  const auto id = request.at("id").get<std::string>();
  return {{"id", id}, {"response", encode_point(sample(id))}};
}

}  // namespace paretohqd::synthetic
