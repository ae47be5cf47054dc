#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace vwdsim::detail {

// Minimum of m_S - sum_{n in S} mu_n over nonempty proper subsets S, where
// m_S = 1 - prod_{n in S} off_prob_n. Exact enumeration up to n <= 20; above
// that, a greedy heuristic: sort clients by mu_n / (-log off_prob_n)
// descending and sweep prefixes. Returns {slack, mask}.
inline std::pair<double, uint64_t> min_proper_subset_slack(
    std::span<const double> off_probs, std::span<const double> mu) {
  const int n = static_cast<int>(off_probs.size());
  double best = std::numeric_limits<double>::infinity();
  uint64_t best_mask = 0;
  if (n <= 1) return {best, best_mask};  // no nonempty proper subsets
  if (n <= 20) {
    const uint64_t full = (uint64_t{1} << n) - 1;
    for (uint64_t mask = 1; mask < full; ++mask) {
      double prod = 1.0, sum = 0.0;
      uint64_t m = mask;
      while (m) {
        const int i = std::countr_zero(m);
        prod *= off_probs[i];
        sum += mu[i];
        m &= m - 1;
      }
      const double slack = (1.0 - prod) - sum;
      if (slack < best) {
        best = slack;
        best_mask = mask;
      }
    }
    return {best, best_mask};
  }
  // Greedy prefix sweep. -log(off) is the capacity "cost" a client adds to a
  // subset; clients with high mu per unit cost violate first.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> ratio(n);
  for (int i = 0; i < n; ++i) {
    const double cost = -std::log(off_probs[i]);
    ratio[i] = cost > 0.0 ? mu[i] / cost : std::numeric_limits<double>::infinity();
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return ratio[a] > ratio[b]; });
  double prod = 1.0, sum = 0.0;
  uint64_t mask = 0;
  for (int k = 0; k < n - 1; ++k) {  // prefixes of size 1..n-1 (proper subsets)
    const int i = order[k];
    prod *= off_probs[i];
    sum += mu[i];
    mask |= uint64_t{1} << i;
    const double slack = (1.0 - prod) - sum;
    if (slack < best) {
      best = slack;
      best_mask = mask;
    }
  }
  return {best, best_mask};
}

}  // namespace vwdsim::detail
