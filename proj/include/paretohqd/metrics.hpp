#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paretohqd/core.hpp"
#include "paretohqd/geometry.hpp"

namespace paretohqd {

/// Average test-set rewards of one aligned model.
struct EvaluationPoint {
  PreferenceVector preference;
  RewardVector mean_rewards;
};

/// Measure of the union of boxes [reference, p] (maximization). Points that
/// do not strictly exceed the reference in every objective add nothing.
/// Two objectives use a sweep, more use recursive slicing.
double hypervolume(std::span<const RewardVector> points,
                   const RewardVector& reference);

/// Recursive slicing down to one dimension, any arity.
double hypervolume_slicing(std::span<const RewardVector> points,
                           const RewardVector& reference);

/// Uniform sampling estimate over the box [reference, max of points].
double hypervolume_monte_carlo(std::span<const RewardVector> points,
                               const RewardVector& reference,
                               std::size_t samples, std::uint64_t seed);

enum class CollapseReason { kNone, kRepetition, kTooShort };

std::string_view to_string(CollapseReason r);

struct CollapseVerdict {
  bool collapsed = false;
  CollapseReason reason = CollapseReason::kNone;
  std::optional<std::string> trigger_phrase;
  std::size_t word_count = 0;
};

/// Words used by the collapse detector: lowercase, punctuation replaced by
/// whitespace except apostrophes between two word characters.
std::vector<std::string> collapse_tokens(std::string_view text);

/// Fewer than five words, or a 2..4 word phrase occurring at least four
/// times (overlapping), marks a response as collapsed.
CollapseVerdict detect_collapse(std::string_view response);

double collapse_rate(std::span<const std::string> responses);

/// Reference point of the hypervolume in summarize_front.
struct HvReference {
  /// Empty: origin of normalized space. Otherwise a raw-space point that is
  /// normalized with the same bounds as the front.
  std::optional<RewardVector> raw;
};

struct FrontRow {
  PreferenceVector preference;
  RewardVector raw;
  RewardVector normalized;
  bool dominated = false;
};

struct FrontReport {
  std::vector<FrontRow> rows;
  double hypervolume = 0.0;
};

FrontReport summarize_front(std::span<const EvaluationPoint> points,
                            const RewardBounds& b,
                            const HvReference& reference = {});

/// Columns: w_*, raw_*, norm_*, dominated.
void write_front_report_csv(std::ostream& out, const FrontReport& report,
                            const std::vector<std::string>& objective_names);
/// Normalized coordinates only, one row per point.
void write_front_plot_csv(std::ostream& out, const FrontReport& report,
                          const std::vector<std::string>& objective_names);

}  // namespace paretohqd
