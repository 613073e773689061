#include "paretohqd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace paretohqd {

RewardVector::RewardVector(std::vector<double> values)
    : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("non-finite reward");
  }
}

PreferenceVector::PreferenceVector(std::vector<double> weights)
    : weights_(std::move(weights)) {
  if (weights_.empty()) throw DataError("empty preference vector");
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
      throw DataError("preference weight outside [0, 1]");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw DataError("preference weights must sum to 1, got " +
                    std::to_string(sum));
  }
}

PreferenceVector PreferenceVector::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw DataError("preference weight must be finite and nonnegative");
    }
    sum += w;
  }
  if (sum <= 0.0) throw DataError("preference weights sum to zero");
  for (double& w : weights) w /= sum;
  return PreferenceVector(std::move(weights));
}

Dataset::Dataset(std::vector<std::string> objective_names)
    : objective_names_(std::move(objective_names)) {
  if (objective_names_.size() < 2) {
    throw ConfigError("objective count must be at least 2");
  }
}

Dataset Dataset::with_objectives(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back("r" + std::to_string(i + 1));
  return Dataset(std::move(names));
}

void Dataset::add(ScoredExample example) {
  if (example.id.empty()) throw DataError("empty example id");
  if (example.rewards && example.rewards->size() != objective_count()) {
    throw ArityError("reward arity mismatch for id '" + example.id +
                     "': expected " + std::to_string(objective_count()) +
                     ", got " + std::to_string(example.rewards->size()));
  }
  auto [it, inserted] = index_.emplace(example.id, examples_.size());
  if (!inserted) throw DataError("duplicate id '" + example.id + "'");
  examples_.push_back(std::move(example));
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Dataset::fully_scored() const {
  return std::all_of(examples_.begin(), examples_.end(),
                     [](const ScoredExample& e) { return e.rewards.has_value(); });
}

const RewardVector& Dataset::rewards_at(std::size_t i) const {
  const auto& ex = examples_.at(i);
  if (!ex.rewards) throw DataError("example '" + ex.id + "' is not scored");
  return *ex.rewards;
}

std::vector<RewardVector> Dataset::reward_matrix() const {
  std::vector<RewardVector> out;
  out.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) out.push_back(rewards_at(i));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(objective_names_);
  out.examples_.reserve(indices.size());
  for (std::size_t i : indices) out.add(examples_.at(i));
  return out;
}

void require_same_arity(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw ArityError(std::string(what) + ": arity mismatch (" +
                     std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace paretohqd
