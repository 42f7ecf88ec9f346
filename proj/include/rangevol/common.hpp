#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rangevol {

// Error taxonomy. argument_error / data_error mean the inputs were rejected
// before any computation ran (CLI exit code 2); numeric_error means the
// computation itself failed (CLI exit code 1).
struct argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-order pairwise summation. Used for every likelihood-style sum so
// results do not depend on evaluation order or thread schedule.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(std::span<const double>(x));
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace rangevol
