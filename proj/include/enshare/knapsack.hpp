#pragma once

// Exact 0/1 knapsack on integer weights. Among optimal subsets both solvers
// return the lexicographically smallest ascending index sequence, so their
// answers agree item for item, not only in value.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace enshare {

struct KnapsackProblem {
  std::vector<std::int64_t> weights;  // >= 0
  std::vector<std::int64_t> values;   // >= 0
  std::int64_t capacity = 0;          // >= 0
};

struct KnapsackSolution {
  std::vector<std::size_t> chosen;  // ascending item indices
  std::int64_t value = 0;
  std::int64_t weight = 0;
};

KnapsackSolution solve_knapsack_dp(const KnapsackProblem& problem);

// Exhaustive enumeration, for at most kMaxBruteforceItems items.
inline constexpr std::size_t kMaxBruteforceItems = 20;
KnapsackSolution solve_knapsack_bruteforce(const KnapsackProblem& problem);

}  // namespace enshare
