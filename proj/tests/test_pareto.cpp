#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "paretohqd/geometry.hpp"
#include "paretohqd/pareto.hpp"

using namespace paretohqd;

namespace {

Dataset make(const std::vector<std::vector<double>>& rows) {
  Dataset d = Dataset::with_objectives(rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ScoredExample ex;
    ex.id = "p" + std::to_string(i);
    ex.rewards = RewardVector(rows[i]);
    d.add(std::move(ex));
  }
  return d;
}

std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                             bool coarse) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> grid(0, 5);
  std::vector<std::vector<double>> rows(n, std::vector<double>(m));
  for (auto& r : rows) {
    for (auto& x : r) x = coarse ? grid(rng) : u(rng);
  }
  return rows;
}

std::vector<std::set<std::size_t>> as_sets(const ParetoLayering& l) {
  std::vector<std::set<std::size_t>> out;
  for (const auto& layer : l.layers) out.emplace_back(layer.begin(), layer.end());
  return out;
}

}  // namespace

TEST_CASE("dominance") {
  CHECK(dominates(RewardVector{1, 2}, RewardVector{1, 1}));
  CHECK_FALSE(dominates(RewardVector{1, 2}, RewardVector{2, 1}));
  CHECK_FALSE(dominates(RewardVector{1, 1}, RewardVector{1, 1}));
  CHECK_THROWS_AS(dominates(RewardVector{1, 2}, RewardVector{1, 2, 3}), ArityError);
}

TEST_CASE("dominance is a strict partial order") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> g(0, 3);
  for (int i = 0; i < 20000; ++i) {
    const RewardVector a{double(g(rng)), double(g(rng)), double(g(rng))};
    const RewardVector b{double(g(rng)), double(g(rng)), double(g(rng))};
    const RewardVector c{double(g(rng)), double(g(rng)), double(g(rng))};
    CHECK_FALSE(dominates(a, a));
    if (dominates(a, b)) CHECK_FALSE(dominates(b, a));
    if (dominates(a, b) && dominates(b, c)) CHECK(dominates(a, c));
  }
}

TEST_CASE("layer_fronts small cases") {
  const auto chain = layer_fronts(make({{2, 2}, {1, 1}}));
  REQUIRE(chain.layer_count() == 2);
  CHECK(chain.layers[0] == std::vector<std::size_t>{0});
  CHECK(chain.layers[1] == std::vector<std::size_t>{1});
  CHECK(chain.layer_of == std::vector<std::size_t>{1, 2});

  const auto dup = layer_fronts(make({{1, 1}, {1, 1}}));
  REQUIRE(dup.layer_count() == 1);
  CHECK(dup.layers[0] == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(layer_fronts(Dataset::with_objectives(2)), DataError);
}

TEST_CASE("layer_fronts matches the brute-force peeler") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t m = 2 + trial % 3;  // 2, 3 and 4 objectives
    const auto rows = random_rows(rng, size(rng), m, trial % 2 == 0);
    const auto got = as_sets(layer_fronts(make(rows)));
    const auto want = oracle::peel_layers(rows);
    CHECK(got == want);
  }
}

TEST_CASE("layering invariants") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rows = random_rows(rng, 150, 2 + trial % 2, trial % 3 == 0);
    const auto l = layer_fronts(make(rows));
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < l.layers.size(); ++k) {
      for (std::size_t i : l.layers[k]) {
        CHECK(seen.insert(i).second);
        CHECK(l.layer_of[i] == k + 1);
        for (std::size_t j : l.layers[k]) CHECK_FALSE(oracle::dominates(rows[j], rows[i]));
        if (k > 0) {
          bool covered = false;
          for (std::size_t j : l.layers[k - 1]) covered |= oracle::dominates(rows[j], rows[i]);
          CHECK(covered);
        }
      }
    }
    CHECK(seen.size() == rows.size());
  }
}

TEST_CASE("layer partition is permutation invariant") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto rows = random_rows(rng, 120, 2 + trial % 2, true);
    const Dataset d = make(rows);
    std::vector<std::size_t> perm(rows.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Dataset shuffled = Dataset::with_objectives(rows.front().size());
    for (std::size_t p : perm) shuffled.add(d[p]);

    auto id_sets = [](const Dataset& data, const ParetoLayering& l) {
      std::vector<std::set<std::string>> out;
      for (const auto& layer : l.layers) {
        std::set<std::string> ids;
        for (std::size_t i : layer) ids.insert(data[i].id);
        out.push_back(ids);
      }
      return out;
    };
    CHECK(id_sets(d, layer_fronts(d)) == id_sets(shuffled, layer_fronts(shuffled)));
  }
}

TEST_CASE("monotone transforms leave the layering unchanged") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto rows = random_rows(rng, 100, 3, trial % 2 == 0);
    auto mapped = rows;
    for (auto& r : mapped) {
      r[0] = std::exp(r[0]);
      r[1] = 3 * r[1] * r[1] * r[1] - 7;
      r[2] = std::atan(r[2]);
    }
    CHECK(as_sets(layer_fronts(make(rows))) == as_sets(layer_fronts(make(mapped))));
  }
}

TEST_CASE("build_pareto_hq") {
  std::mt19937_64 rng(4);
  const auto rows = random_rows(rng, 300, 2, false);
  const Dataset d = make(rows);
  const auto layers = layer_fronts(d);

  const ParetoSubset one = build_pareto_hq(d, 1);
  CHECK(one.layers_used == 1);
  CHECK(one.source_indices == layers.layers[0]);

  const ParetoSubset all = build_pareto_hq(d, 1000);
  CHECK(all.exhausted);
  CHECK(all.data.size() == d.size());
  CHECK(all.layers_used == layers.layer_count());

  for (std::size_t n_p : {5u, 40u, 150u, 299u}) {
    const ParetoSubset s = build_pareto_hq(d, n_p);
    CHECK_FALSE(s.exhausted);
    CHECK(s.data.size() >= n_p);
    std::size_t before_last = 0;
    for (std::size_t k = 0; k + 1 < s.layers_used; ++k) before_last += layers.layers[k].size();
    CHECK(before_last < n_p);
    CHECK(std::is_sorted(s.source_indices.begin(), s.source_indices.end()));
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      CHECK(s.data[i].id == d[s.source_indices[i]].id);
    }
  }
  CHECK_THROWS_AS(build_pareto_hq(Dataset::with_objectives(2), 3), DataError);
}

TEST_CASE("pareto thresholds follow the N*k_t/2 rule") {
  CHECK(stage1_pareto_threshold(11, 100) == 550);
  CHECK(stage2_pareto_threshold(11, 100) == 275);
  CHECK(stage1_pareto_threshold(3, 5) == 8);
  CHECK(stage2_pareto_threshold(3, 5) == 4);
}

TEST_CASE("imbalance histogram") {
  const Dataset corners = make({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const RewardBounds b = compute_bounds(corners);
  const Histogram h = imbalance_histogram(corners, 2, b);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const std::size_t cell[2] = {i, j};
      CHECK(h.count(cell) == 1);
    }
  }

  const Dataset same = make({{0.4, 0.4}, {0.4, 0.4}, {0.4, 0.4}});
  const Histogram s = imbalance_histogram(same, 4, compute_bounds(same));
  CHECK(std::count(s.counts.begin(), s.counts.end(), 3u) == 1);
  CHECK(s.total() == 3);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> rows(10000);
  for (auto& r : rows) r = {u(rng), u(rng)};
  const Histogram big = imbalance_histogram(make(rows), 10, {{0, 0}, {1, 1}});
  const double sd = std::sqrt(10000 * 0.01 * 0.99);
  for (std::size_t c : big.counts) CHECK(std::abs(double(c) - 100.0) < 5 * sd);
  CHECK(big.total() == 10000);

  std::ostringstream csv;
  write_histogram_csv(csv, h, {"r1", "r2"});
  CHECK(csv.str().rfind("r1\\r2,0,0.5\n", 0) == 0);
}

TEST_CASE("layer assignment export") {
  const Dataset d = make({{2, 2}, {1, 1}, {3, 0}});
  std::ostringstream os;
  write_layer_assignment(os, d, layer_fronts(d));
  CHECK(os.str() == "{\"id\":\"p0\",\"layer\":1}\n{\"id\":\"p1\",\"layer\":2}\n"
                    "{\"id\":\"p2\",\"layer\":1}\n");
}
