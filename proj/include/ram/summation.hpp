#pragma once

#include <cstddef>
#include <span>

namespace ram {

/// Pairwise (cascade) summation, so reductions do not depend on how the
/// terms were grouped to within a few ulps.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace ram
