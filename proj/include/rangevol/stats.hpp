#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rangevol/common.hpp"

// Small statistical toolbox shared by the likelihood, diagnostics and report
// layers: descriptive moments, sample autocorrelations, and the distribution
// functions needed for p-values (normal, chi-squared, Kolmogorov).
namespace rangevol {

inline double mean_of(std::span<const double> x) {
  if (x.empty()) throw argument_error("mean_of: empty input");
  return pairwise_sum(x) / static_cast<double>(x.size());
}

// Population variance (1/n denominator).
inline double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - m;
    sq[i] = d * d;
  }
  return pairwise_sum(sq) / static_cast<double>(x.size());
}

inline double sd_of(std::span<const double> x) { return std::sqrt(variance_of(x)); }

inline double skewness_of(std::span<const double> x) {
  const double m = mean_of(x);
  std::vector<double> c2(x.size()), c3(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - m;
    c2[i] = d * d;
    c3[i] = d * d * d;
  }
  const double n = static_cast<double>(x.size());
  const double s2 = pairwise_sum(c2) / n;
  if (s2 <= 0.0) throw numeric_error("skewness_of: zero variance");
  return (pairwise_sum(c3) / n) / std::pow(s2, 1.5);
}

// Sample autocorrelations rho_1..rho_maxlag (lag 0 omitted).
inline std::vector<double> autocorrelations(std::span<const double> x, int maxlag) {
  const std::size_t n = x.size();
  if (maxlag < 1) throw argument_error("autocorrelations: maxlag must be >= 1");
  if (n <= static_cast<std::size_t>(maxlag))
    throw argument_error("autocorrelations: series shorter than maxlag");
  const double m = mean_of(x);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = x[i] - m;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = dev[i] * dev[i];
  const double denom = pairwise_sum(sq);
  if (denom <= 0.0) throw numeric_error("autocorrelations: constant series has undefined autocorrelation");
  std::vector<double> rho(static_cast<std::size_t>(maxlag));
  std::vector<double> prod;
  for (int k = 1; k <= maxlag; ++k) {
    prod.assign(n - static_cast<std::size_t>(k), 0.0);
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t)
      prod[t - static_cast<std::size_t>(k)] = dev[t] * dev[t - static_cast<std::size_t>(k)];
    rho[static_cast<std::size_t>(k - 1)] = pairwise_sum(prod) / denom;
  }
  return rho;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// Regularized lower incomplete gamma P(a, x): series for x < a+1, continued
// fraction otherwise.
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw argument_error("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-16)
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    throw numeric_error("regularized_gamma_p: series failed to converge");
  }
  // Lentz's continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace detail

// Upper tail of the chi-squared distribution with dof degrees of freedom.
inline double chi_squared_sf(double x, int dof) {
  if (dof < 1) throw argument_error("chi_squared_sf: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  return 1.0 - detail::regularized_gamma_p(0.5 * dof, 0.5 * x);
}

// Survival function of the Kolmogorov distribution: P(K > x) where K is the
// limit of sqrt(n) * D_n. Alternating series for large x, Jacobi-transformed
// series for small x.
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    const double t = std::exp(-M_PI * M_PI / (8.0 * x * x));
    const double cdf = std::sqrt(2.0 * M_PI) / x *
                       (t + std::pow(t, 9.0) + std::pow(t, 25.0) + std::pow(t, 49.0));
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double s = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

// Reference CDFs for the unit-mean innovation laws.
inline double exponential_cdf(double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x); }

inline double lognormal_mean_one_cdf(double x, double theta2) {
  if (!(theta2 > 0.0)) throw argument_error("lognormal_mean_one_cdf: theta2 must be > 0");
  if (x <= 0.0) return 0.0;
  const double theta = std::sqrt(theta2);
  return normal_cdf((std::log(x) + 0.5 * theta2) / theta);
}

}  // namespace rangevol
