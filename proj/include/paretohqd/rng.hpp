#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace paretohqd {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the named substream `name` (and optional index) under `root`.
/// Independent of call order, so components can draw in any order.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name,
                          std::uint64_t index = 0);

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view name,
                                std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, name, index));
}

}  // namespace paretohqd
