#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace lcnl {

/// log(sum(exp(v))) with the maximum factored out. Empty input or all -inf
/// gives -inf.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Writes softmax(v) into out (same length). Max-shifted.
inline void softmax(std::span<const double> v, std::span<double> out) {
  const double lse = log_sum_exp(v);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
}

/// Deterministic pairwise reduction. Blocks of at most 16 are summed left to
/// right; larger ranges split at n/2 and the halves are added. The result
/// depends only on the values and their order, never on how the values were
/// produced, so serial and parallel producers give identical sums.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace lcnl
