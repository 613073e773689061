#include "paretohqd/metrics.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>

#include "format.hpp"
#include "paretohqd/pareto.hpp"

namespace paretohqd {

namespace {

using Coords = std::vector<std::vector<double>>;

// Points strictly above the reference in every objective; the rest span
// zero-measure boxes.
Coords clip_to_reference(std::span<const RewardVector> points,
                         const RewardVector& reference) {
  Coords out;
  for (const auto& p : points) {
    require_same_arity(p.size(), reference.size(), "hypervolume");
    bool inside = true;
    for (std::size_t i = 0; i < p.size(); ++i) inside = inside && p[i] > reference[i];
    if (inside) out.emplace_back(p.begin(), p.end());
  }
  return out;
}

double sweep_2d(Coords pts, const std::vector<double>& ref) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
  });
  double area = 0.0;
  double covered_y = ref[1];
  for (const auto& p : pts) {
    if (p[1] > covered_y) {
      area += (p[0] - ref[0]) * (p[1] - covered_y);
      covered_y = p[1];
    }
  }
  return area;
}

// Slabs along the last coordinate, each measured in one dimension less.
double slice(Coords pts, const std::vector<double>& ref, std::size_t dims) {
  if (pts.empty()) return 0.0;
  const std::size_t last = dims - 1;
  if (dims == 1) {
    double top = ref[0];
    for (const auto& p : pts) top = std::max(top, p[0]);
    return top - ref[0];
  }
  std::sort(pts.begin(), pts.end(),
            [last](const auto& a, const auto& b) { return a[last] > b[last]; });
  double volume = 0.0;
  Coords active;
  for (std::size_t i = 0; i < pts.size();) {
    const double level = pts[i][last];
    while (i < pts.size() && pts[i][last] == level) {
      active.emplace_back(pts[i].begin(), pts[i].begin() + static_cast<std::ptrdiff_t>(last));
      ++i;
    }
    const double next = i < pts.size() ? pts[i][last] : ref[last];
    volume += slice(active, ref, last) * (level - next);
  }
  return volume;
}

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

double hypervolume(std::span<const RewardVector> points,
                   const RewardVector& reference) {
  Coords pts = clip_to_reference(points, reference);
  const std::vector<double> ref(reference.begin(), reference.end());
  if (ref.size() == 2) return sweep_2d(std::move(pts), ref);
  return slice(std::move(pts), ref, ref.size());
}

double hypervolume_slicing(std::span<const RewardVector> points,
                           const RewardVector& reference) {
  const std::vector<double> ref(reference.begin(), reference.end());
  return slice(clip_to_reference(points, reference), ref, ref.size());
}

double hypervolume_monte_carlo(std::span<const RewardVector> points,
                               const RewardVector& reference,
                               std::size_t samples, std::uint64_t seed) {
  const Coords pts = clip_to_reference(points, reference);
  if (pts.empty() || samples == 0) return 0.0;
  const std::size_t m = reference.size();
  std::vector<double> upper(reference.begin(), reference.end());
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < m; ++i) upper[i] = std::max(upper[i], p[i]);
  }
  double box = 1.0;
  for (std::size_t i = 0; i < m; ++i) box *= upper[i] - reference[i];
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (std::size_t i = 0; i < m; ++i) axes.emplace_back(reference[i], upper[i]);
  std::vector<double> x(m);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < m; ++i) x[i] = axes[i](rng);
    for (const auto& p : pts) {
      bool covered = true;
      for (std::size_t i = 0; i < m && covered; ++i) covered = x[i] <= p[i];
      if (covered) {
        ++hits;
        break;
      }
    }
  }
  return box * static_cast<double>(hits) / static_cast<double>(samples);
}

std::string_view to_string(CollapseReason r) {
  switch (r) {
    case CollapseReason::kNone:
      return "none";
    case CollapseReason::kRepetition:
      return "repetition";
    case CollapseReason::kTooShort:
      return "too_short";
  }
  return "none";
}

std::vector<std::string> collapse_tokens(std::string_view text) {
  // U+2019 is folded into an ASCII apostrophe first.
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.substr(i, 3) == "\xE2\x80\x99") {
      s.push_back('\'');
      i += 2;
    } else {
      s.push_back(text[i]);
    }
  }
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !cur.empty() && i + 1 < s.size() &&
               is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
      cur.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

CollapseVerdict detect_collapse(std::string_view response) {
  constexpr std::size_t kMinWords = 5;
  constexpr std::size_t kRepeatThreshold = 4;
  const auto tokens = collapse_tokens(response);
  CollapseVerdict v;
  v.word_count = tokens.size();
  if (tokens.size() < kMinWords) {
    v.collapsed = true;
    v.reason = CollapseReason::kTooShort;
    return v;
  }
  auto phrase = [&](std::size_t start, std::size_t n) {
    std::string p = tokens[start];
    for (std::size_t i = 1; i < n; ++i) p += ' ' + tokens[start + i];
    return p;
  };
  std::map<std::string, std::size_t> counts;
  for (std::size_t n = 2; n <= 4; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[phrase(i, n)];
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t n = 2; n <= 4 && i + n <= tokens.size(); ++n) {
      std::string p = phrase(i, n);
      if (counts[p] >= kRepeatThreshold) {
        v.collapsed = true;
        v.reason = CollapseReason::kRepetition;
        v.trigger_phrase = std::move(p);
        return v;
      }
    }
  }
  return v;
}

double collapse_rate(std::span<const std::string> responses) {
  if (responses.empty()) throw DataError("collapse rate of an empty response set");
  std::size_t collapsed = 0;
  for (const auto& r : responses) collapsed += detect_collapse(r).collapsed ? 1 : 0;
  return static_cast<double>(collapsed) / static_cast<double>(responses.size());
}

FrontReport summarize_front(std::span<const EvaluationPoint> points,
                            const RewardBounds& b, const HvReference& reference) {
  if (points.empty()) throw DataError("no evaluation points");
  FrontReport report;
  std::vector<RewardVector> normalized;
  for (const auto& p : points) {
    require_same_arity(p.mean_rewards.size(), b.size(), "summarize_front");
    require_same_arity(p.preference.size(), b.size(), "summarize_front");
    normalized.push_back(normalize(p.mean_rewards, b));
    report.rows.push_back({p.preference, p.mean_rewards, normalized.back(), false});
  }
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    for (std::size_t j = 0; j < normalized.size() && !report.rows[i].dominated; ++j) {
      report.rows[i].dominated = j != i && dominates(normalized[j], normalized[i]);
    }
  }
  const RewardVector ref = reference.raw
                               ? normalize(*reference.raw, b)
                               : RewardVector(std::vector<double>(b.size(), 0.0));
  report.hypervolume = hypervolume(normalized, ref);
  return report;
}

void write_front_report_csv(std::ostream& out, const FrontReport& report,
                            const std::vector<std::string>& objective_names) {
  for (const auto& n : objective_names) out << "w_" << n << ',';
  for (const auto& n : objective_names) out << "raw_" << n << ',';
  for (const auto& n : objective_names) out << "norm_" << n << ',';
  out << "dominated\n";
  for (const auto& row : report.rows) {
    require_same_arity(row.raw.size(), objective_names.size(), "front report");
    for (double w : row.preference.weights()) out << detail::format_double(w) << ',';
    for (double v : row.raw) out << detail::format_double(v) << ',';
    for (double v : row.normalized) out << detail::format_double(v) << ',';
    out << (row.dominated ? "true" : "false") << '\n';
  }
}

void write_front_plot_csv(std::ostream& out, const FrontReport& report,
                          const std::vector<std::string>& objective_names) {
  out << "point";
  for (const auto& n : objective_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    out << i;
    for (double v : report.rows[i].normalized) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

}  // namespace paretohqd
