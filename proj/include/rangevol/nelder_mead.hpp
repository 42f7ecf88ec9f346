#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "rangevol/common.hpp"

// Derivative-free simplex minimizer (Nelder-Mead with standard coefficients).
// Termination requires both the function spread and the simplex diameter to
// fall below their relative tolerances.
namespace rangevol {

struct NelderMeadOptions {
  int max_iter = 4000;
  double param_tol = 1e-8;
  double value_tol = 1e-10;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  long evaluations = 0;
};

template <class F>
NelderMeadResult nelder_mead(F&& f, std::span<const double> x0, std::span<const double> step,
                             const NelderMeadOptions& opts = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw argument_error("nelder_mead: empty start point");
  if (step.size() != n) throw argument_error("nelder_mead: step size mismatch");

  NelderMeadResult result;
  std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i];

  std::vector<double> values(n + 1);
  const auto eval = [&](std::span<const double> x) {
    ++result.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), candidate(n);

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;

  for (result.iterations = 0; result.iterations < opts.max_iter; ++result.iterations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[n - 1];

    // Convergence: relative value spread and simplex diameter.
    const double f_spread = values[worst] - values[best];
    double x_spread = 0.0, x_scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      x_scale = std::max(x_scale, std::fabs(simplex[best][j]));
      for (std::size_t i = 0; i <= n; ++i)
        x_spread = std::max(x_spread, std::fabs(simplex[i][j] - simplex[best][j]));
    }
    if (f_spread <= opts.value_tol * (1.0 + std::fabs(values[best])) &&
        x_spread <= opts.param_tol * (1.0 + x_scale)) {
      result.converged = true;
      break;
    }

    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        if (i != worst) s += simplex[i][j];
      centroid[j] = s / static_cast<double>(n);
    }

    const auto blend = [&](double coef) {
      for (std::size_t j = 0; j < n; ++j)
        candidate[j] = centroid[j] + coef * (centroid[j] - simplex[worst][j]);
    };

    blend(kReflect);
    const double f_reflect = eval(candidate);
    if (f_reflect < values[order[0]]) {
      const std::vector<double> reflected = candidate;
      blend(kExpand);
      const double f_expand = eval(candidate);
      if (f_expand < f_reflect) {
        simplex[worst] = candidate;
        values[worst] = f_expand;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflect;
      }
      continue;
    }
    if (f_reflect < values[second_worst]) {
      simplex[worst] = candidate;
      values[worst] = f_reflect;
      continue;
    }
    if (f_reflect < values[worst]) {
      // Outside contraction.
      blend(kContract);
      const double f_out = eval(candidate);
      if (f_out <= f_reflect) {
        simplex[worst] = candidate;
        values[worst] = f_out;
        continue;
      }
    } else {
      // Inside contraction.
      blend(-kContract);
      const double f_in = eval(candidate);
      if (f_in < values[worst]) {
        simplex[worst] = candidate;
        values[worst] = f_in;
        continue;
      }
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j)
        simplex[i][j] = simplex[best][j] + kShrink * (simplex[i][j] - simplex[best][j]);
      values[i] = eval(simplex[i]);
    }
  }

  const std::size_t best =
      static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  return result;
}

}  // namespace rangevol
