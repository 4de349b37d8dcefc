#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace storyalign {

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::size_t n, std::size_t k) noexcept;

/// Every k-subset of {0..n-1} in lexicographic order.
void for_each_combination(std::size_t n, std::size_t k, const std::function<void(std::span<const std::size_t>)>& visit);

/// The k-subsets a budgeted search evaluates: all of them when C(n, k) <= budget,
/// otherwise `budget` distinct subsets drawn with a generator seeded by `seed`.
/// Each subset is ascending and the list is in lexicographic order.
std::vector<std::vector<std::size_t>> candidate_combinations(std::size_t n, std::size_t k, std::uint64_t budget,
                                                             std::uint64_t seed);

struct BestCombination {
  std::vector<std::size_t> indices;
  double score = 0.0;
  std::size_t evaluated = 0;
  bool exhaustive = false;
};

/// Highest-scoring subset among candidate_combinations(n, k, budget, seed).
/// Equal scores resolve to the lexicographically smallest subset, so the
/// answer is the same for any thread count.
BestCombination best_combination(std::size_t n, std::size_t k, std::uint64_t budget, std::uint64_t seed,
                                 const std::function<double(std::span<const std::size_t>)>& score,
                                 std::size_t threads = 1);

}  // namespace storyalign
