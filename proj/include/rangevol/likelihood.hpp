#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/model.hpp"
#include "rangevol/recursion.hpp"

// Conditional log-likelihoods for unit-mean exponential and lognormal
// innovations, shared by every family member. Sums run over the model-defined
// indices [path.start, n) and are accumulated with pairwise summation.
namespace rangevol {

inline constexpr double kLambdaFloor = 1e-12;

// -sum(ln(lambda_t) + R_t / lambda_t).
inline double loglik_exponential(std::span<const double> r, const LambdaPath& path) {
  if (r.size() != path.lambda.size())
    throw argument_error("loglik_exponential: series/path length mismatch");
  std::vector<double> terms(r.size() - path.start);
  for (std::size_t t = path.start; t < r.size(); ++t) {
    if (!(path.lambda[t] > 0.0))
      throw argument_error("loglik_exponential: lambda must be > 0 at index " + std::to_string(t));
    const double lam = std::max(path.lambda[t], kLambdaFloor);
    terms[t - path.start] = -(std::log(lam) + r[t] / lam);
  }
  return pairwise_sum(terms);
}

// -1/2 sum[ ln(2 pi theta2_m) + 2 ln(R_t) + (ln R_t - ln lambda_t + theta2_m/2)^2 / theta2_m ]
// where m is the branch that generated period t (from path.regime). Pass a
// single theta2 for single-regime families.
inline double loglik_lognormal(std::span<const double> r, const LambdaPath& path,
                               std::span<const double> theta2_by_branch) {
  if (r.size() != path.lambda.size())
    throw argument_error("loglik_lognormal: series/path length mismatch");
  if (theta2_by_branch.empty()) throw argument_error("loglik_lognormal: theta2 missing");
  for (double t2 : theta2_by_branch)
    if (!(t2 > 0.0)) throw argument_error("loglik_lognormal: theta2 must be > 0");
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::vector<double> terms(r.size() - path.start);
  for (std::size_t t = path.start; t < r.size(); ++t) {
    if (!(r[t] > 0.0))
      throw data_error(
          "loglik_lognormal: non-positive range at index " + std::to_string(t) +
          "; lognormal innovations require R > 0 (see the zero-floor ingestion policy)");
    if (!(path.lambda[t] > 0.0))
      throw argument_error("loglik_lognormal: lambda must be > 0 at index " + std::to_string(t));
    const std::size_t m =
        (path.regime[t] == Regime::Up || theta2_by_branch.size() == 1) ? 0 : 1;
    const double t2 = theta2_by_branch[m];
    const double lam = std::max(path.lambda[t], kLambdaFloor);
    const double dev = std::log(r[t]) - std::log(lam) + 0.5 * t2;
    terms[t - path.start] =
        -0.5 * (std::log(two_pi * t2) + 2.0 * std::log(r[t]) + dev * dev / t2);
  }
  return pairwise_sum(terms);
}

// Standardized residuals eps_t = R_t / lambda_t with their regime labels,
// reported for the model-defined span only.
struct ResidualSeries {
  std::vector<double> eps;
  std::vector<Regime> regime;
  std::size_t start = 0;  // absolute index of eps[0] in the original series
};

inline ResidualSeries standardized_residuals(std::span<const double> r, const LambdaPath& path) {
  if (r.size() != path.lambda.size())
    throw argument_error("standardized_residuals: series/path length mismatch");
  ResidualSeries out;
  out.start = path.start;
  out.eps.reserve(r.size() - path.start);
  out.regime.reserve(r.size() - path.start);
  for (std::size_t t = path.start; t < r.size(); ++t) {
    const double lam = path.lambda[t];
    if (!(lam > 0.0)) throw argument_error("standardized_residuals: lambda must be > 0");
    out.eps.push_back(r[t] / lam);
    out.regime.push_back(path.regime[t]);
  }
  return out;
}

namespace detail {

inline std::vector<double> theta2_of(const ModelSpec& spec, const ParamVector& params) {
  std::vector<double> t2;
  if (spec.innovation == Innovation::Lognormal)
    for (const auto& b : params.branches) t2.push_back(b.theta2);
  return t2;
}

}  // namespace detail

// Full-model log-likelihood: total-range families score R against the shared
// path; directional families add their two independent component scores.
inline double model_loglik(std::span<const RangeObs> series, const ModelPath& path,
                           const ParamVector& params, const ModelSpec& spec) {
  const auto column = [&](auto proj) {
    std::vector<double> v(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) v[i] = proj(series[i]);
    return v;
  };
  if (is_directional(spec.family)) {
    const auto ru = column([](const RangeObs& o) { return o.ru; });
    const auto rd = column([](const RangeObs& o) { return o.rd; });
    if (spec.innovation == Innovation::Exponential)
      return loglik_exponential(ru, *path.up) + loglik_exponential(rd, *path.down);
    const double t2u = params.branches[0].theta2;
    const double t2d = params.branches[1].theta2;
    return loglik_lognormal(ru, *path.up, std::span<const double>(&t2u, 1)) +
           loglik_lognormal(rd, *path.down, std::span<const double>(&t2d, 1));
  }
  const auto r = column([](const RangeObs& o) { return o.r; });
  if (spec.innovation == Innovation::Exponential) return loglik_exponential(r, path.total);
  const auto t2 = detail::theta2_of(spec, params);
  return loglik_lognormal(r, path.total, t2);
}

}  // namespace rangevol
