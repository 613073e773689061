#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace paretohqd {

using json = nlohmann::ordered_json;

/// Absolute tolerance used by every geometric equality check.
inline constexpr double kTolerance = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, duplicate or non-finite input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Two vectors (or a vector and a declared objective count) disagree in length.
class ArityError : public Error {
 public:
  using Error::Error;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required earlier artifact (e.g. a stage-1 record) is missing.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Scores from the M reward models for one (prompt, response) pair.
/// Every component is finite.
class RewardVector {
 public:
  RewardVector() = default;
  explicit RewardVector(std::vector<double> values);
  RewardVector(std::initializer_list<double> values)
      : RewardVector(std::vector<double>(values)) {}

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const RewardVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Nonnegative objective weights summing to one.
class PreferenceVector {
 public:
  explicit PreferenceVector(std::vector<double> weights);
  PreferenceVector(std::initializer_list<double> weights)
      : PreferenceVector(std::vector<double>(weights)) {}

  /// Rescales nonnegative weights with a positive sum so they sum to one.
  static PreferenceVector normalized(std::vector<double> weights);

  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

  bool operator==(const PreferenceVector&) const = default;

 private:
  std::vector<double> weights_;
};

struct ScoredExample {
  std::string id;
  std::string prompt;
  std::string response;
  std::optional<RewardVector> rewards;
  /// Fields the dataset format does not know about, kept for round-tripping.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

/// Ordered collection of examples with unique ids and a declared objective
/// count. Rewards, where present, always have that arity.
class Dataset {
 public:
  explicit Dataset(std::vector<std::string> objective_names);

  /// Default names "r1".."rM".
  static Dataset with_objectives(std::size_t count);

  void add(ScoredExample example);

  std::span<const ScoredExample> examples() const { return examples_; }
  const ScoredExample& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  std::size_t objective_count() const { return objective_names_.size(); }
  const std::vector<std::string>& objective_names() const {
    return objective_names_;
  }

  std::optional<std::size_t> find(std::string_view id) const;
  bool fully_scored() const;

  /// Reward vector of example i; throws DataError when it is unscored.
  const RewardVector& rewards_at(std::size_t i) const;
  /// All reward vectors in order; throws DataError on any unscored example.
  std::vector<RewardVector> reward_matrix() const;

  /// New dataset holding the given examples in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::string> objective_names_;
  std::vector<ScoredExample> examples_;
  std::unordered_map<std::string, std::size_t> index_;
};

void require_same_arity(std::size_t a, std::size_t b, std::string_view what);

}  // namespace paretohqd
