#include "enshare/knapsack.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/core.h>

#include "enshare/domain.hpp"

namespace enshare {

namespace {

void check_problem(const KnapsackProblem& p) {
  if (p.weights.size() != p.values.size()) throw Error("knapsack: weights/values size mismatch");
  if (p.capacity < 0) throw Error("knapsack: negative capacity");
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    if (p.weights[k] < 0 || p.values[k] < 0) throw Error("knapsack: negative weight or value");
  }
}

}  // namespace

KnapsackSolution solve_knapsack_dp(const KnapsackProblem& problem) {
  check_problem(problem);
  const std::size_t n = problem.weights.size();
  const std::int64_t total_weight =
      std::accumulate(problem.weights.begin(), problem.weights.end(), std::int64_t{0});
  const auto cap = static_cast<std::size_t>(std::min(problem.capacity, total_weight));
  const std::size_t width = cap + 1;

  // best[i][c]: optimal value using items i..n-1 within capacity c.
  std::vector<std::int64_t> best((n + 1) * width, 0);
  auto at = [&](std::size_t i, std::size_t c) -> std::int64_t& { return best[i * width + c]; };
  for (std::size_t i = n; i-- > 0;) {
    const auto w = static_cast<std::size_t>(problem.weights[i]);
    const std::int64_t v = problem.values[i];
    for (std::size_t c = 0; c <= cap; ++c) {
      std::int64_t skip = at(i + 1, c);
      if (w <= c) skip = std::max(skip, v + at(i + 1, c - w));
      at(i, c) = skip;
    }
  }

  // Walk forward, always taking the smallest next index that still reaches
  // the optimum; stopping early is preferred once the target is met.
  KnapsackSolution sol;
  sol.value = at(0, cap);
  std::int64_t remaining = sol.value;
  std::size_t c = cap;
  std::size_t i = 0;
  while (remaining > 0) {
    bool advanced = false;
    for (std::size_t j = i; j < n; ++j) {
      const auto w = static_cast<std::size_t>(problem.weights[j]);
      if (w <= c && problem.values[j] + at(j + 1, c - w) == remaining) {
        sol.chosen.push_back(j);
        sol.weight += problem.weights[j];
        remaining -= problem.values[j];
        c -= w;
        i = j + 1;
        advanced = true;
        break;
      }
    }
    if (!advanced) throw Error("knapsack: reconstruction failed");
  }
  return sol;
}

KnapsackSolution solve_knapsack_bruteforce(const KnapsackProblem& problem) {
  check_problem(problem);
  const std::size_t n = problem.weights.size();
  if (n > kMaxBruteforceItems) {
    throw Error(fmt::format("brute force limited to {} items, got {}", kMaxBruteforceItems, n));
  }
  KnapsackSolution best;
  bool have = false;
  std::vector<std::size_t> chosen;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::int64_t weight = 0;
    std::int64_t value = 0;
    chosen.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (mask & (std::uint64_t{1} << k)) {
        weight += problem.weights[k];
        value += problem.values[k];
        chosen.push_back(k);
      }
    }
    if (weight > problem.capacity) continue;
    const bool better =
        !have || value > best.value ||
        (value == best.value && std::lexicographical_compare(chosen.begin(), chosen.end(),
                                                              best.chosen.begin(),
                                                              best.chosen.end()));
    if (better) {
      best.chosen = chosen;
      best.value = value;
      best.weight = weight;
      have = true;
    }
  }
  return best;
}

}  // namespace enshare
