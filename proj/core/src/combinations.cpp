#include "storyalign/combinations.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "storyalign/error.hpp"

namespace storyalign {

std::uint64_t binomial(std::size_t n, std::size_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // r * num / i is exact at every step; guard the multiplication.
    const std::uint64_t g = std::gcd(r, static_cast<std::uint64_t>(i));
    const std::uint64_t r_div = r / g;
    const std::uint64_t i_div = i / g;
    const std::uint64_t num_div = num / i_div;
    if (r_div > std::numeric_limits<std::uint64_t>::max() / num_div) return std::numeric_limits<std::uint64_t>::max();
    r = r_div * num_div;
  }
  return r;
}

void for_each_combination(std::size_t n, std::size_t k,
                          const std::function<void(std::span<const std::size_t>)>& visit) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    visit(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::vector<std::vector<std::size_t>> candidate_combinations(std::size_t n, std::size_t k, std::uint64_t budget,
                                                             std::uint64_t seed) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "combination size must be positive");
  if (n < k) {
    throw Error(ErrorKind::Insufficient,
                "pool of " + std::to_string(n) + " cannot supply combinations of " + std::to_string(k));
  }
  if (budget == 0) throw Error(ErrorKind::InvalidArgument, "combination budget must be positive");

  std::vector<std::vector<std::size_t>> out;
  if (binomial(n, k) <= budget) {
    out.reserve(binomial(n, k));
    for_each_combination(n, k, [&](std::span<const std::size_t> c) { out.emplace_back(c.begin(), c.end()); });
    return out;
  }

  // Floyd's algorithm per draw; duplicates are rejected until `budget` distinct subsets exist.
  std::mt19937_64 rng(seed);
  std::set<std::vector<std::size_t>> seen;
  while (seen.size() < budget) {
    std::set<std::size_t> pick;
    for (std::size_t j = n - k; j < n; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (!pick.insert(t).second) pick.insert(j);
    }
    seen.emplace(pick.begin(), pick.end());
  }
  out.assign(seen.begin(), seen.end());
  return out;
}

namespace {

struct Candidate {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double score = -std::numeric_limits<double>::infinity();
};

// Candidates are visited in lexicographic order, so a lower position wins ties.
bool better(const Candidate& a, const Candidate& b) {
  if (b.index == std::numeric_limits<std::size_t>::max()) return true;
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

}  // namespace

BestCombination best_combination(std::size_t n, std::size_t k, std::uint64_t budget, std::uint64_t seed,
                                 const std::function<double(std::span<const std::size_t>)>& score,
                                 std::size_t threads) {
  const auto combos = candidate_combinations(n, k, budget, seed);
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, combos.size());
  std::vector<Candidate> local(workers);

  auto run = [&](std::size_t w) {
    const std::size_t lo = combos.size() * w / workers;
    const std::size_t hi = combos.size() * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i) {
      Candidate c{i, score(combos[i])};
      if (std::isnan(c.score)) throw Error(ErrorKind::NonFinite, "combination score is NaN");
      if (better(c, local[w])) local[w] = c;
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  Candidate best;
  for (const auto& c : local)
    if (c.index != std::numeric_limits<std::size_t>::max() && better(c, best)) best = c;
  return BestCombination{combos[best.index], best.score, combos.size(), binomial(n, k) <= budget};
}

}  // namespace storyalign
