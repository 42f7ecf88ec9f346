#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/likelihood.hpp"
#include "rangevol/model.hpp"
#include "rangevol/nelder_mead.hpp"
#include "rangevol/parallel.hpp"
#include "rangevol/range.hpp"
#include "rangevol/recursion.hpp"
#include "rangevol/rng.hpp"
#include "rangevol/stats.hpp"

// Constrained maximum-likelihood estimation for every family member.
//
// The optimizer contract is "best feasible local optimum across seeded
// multi-starts": a Nelder-Mead search per start on the free parameters, with
// infeasible proposals retracted onto the feasible set and penalized by the
// squared retraction distance. Starts are method-of-moments values jittered
// +-50%; the best log-likelihood wins, ties broken by start index, so results
// are deterministic for a given seed regardless of how many threads run.
namespace rangevol {

struct FitOptions {
  std::uint64_t seed = 0;
  int n_start = 8;      // multi-start count, >= 1
  int max_iter = 4000;  // Nelder-Mead iterations per start
  double param_tol = 1e-8;
  double value_tol = 1e-10;
  int min_obs_per_param = 10;  // require n_eff >= this * k; 0 disables
  int jobs = 1;                // concurrent starts
  int refit_n_start = 2;       // starts used by warm rolling-window refits
  // Frozen parameters by flat index (layout of param_names). Frozen entries
  // are excluded from optimization, from k, and from standard errors.
  std::vector<std::optional<double>> fixed;
  // Optional externally supplied first start (full flat layout).
  std::optional<std::vector<double>> warm_start;
};

struct FitResult {
  ModelSpec spec;  // threshold resolved for TARR
  ParamVector params;
  std::vector<double> flat;
  std::vector<std::string> names;
  std::vector<double> std_errors;  // aligned with flat; NaN where unavailable or fixed
  bool se_available = false;
  std::string se_note;
  double llf = 0.0, aic = 0.0, bic = 0.0;
  std::size_t n_eff = 0;
  int k = 0;  // free-parameter count
  bool converged = false;
  int best_start = -1;
  long evaluations = 0;
  ModelPath path;
  ResidualSeries residuals;  // total-range residuals
  std::optional<ResidualSeries> residuals_up, residuals_down;  // ACARR/FACARR components
};

// aic = -2 llf + 2k, bic = -2 llf + k ln(n_eff).
inline std::pair<double, double> information_criteria(double llf, int k, std::size_t n_eff) {
  if (n_eff == 0) throw argument_error("information_criteria: n_eff must be > 0");
  const double aic = -2.0 * llf + 2.0 * k;
  const double bic = -2.0 * llf + k * std::log(static_cast<double>(n_eff));
  return {aic, bic};
}

namespace detail {

// Precomputed per-fit state; the optimizer objective reuses the workspace
// buffers so an evaluation allocates nothing.
struct FitData {
  ModelSpec spec;
  std::span<const RangeObs> series;
  std::size_t t0 = 0;
  // Total-range families.
  std::vector<double> r, log_r;
  std::vector<std::uint8_t> branch;  // regime branch per index (0 before t0)
  double init_r = 0.0;
  // Directional families.
  std::vector<double> ru, rd, log_ru, log_rd;
  double init_ru = 0.0, init_rd = 0.0;
  // Workspace.
  mutable std::vector<double> lam, lam2, terms, terms2;
};

inline FitData make_fit_data(std::span<const RangeObs> series, const ModelSpec& spec) {
  if (spec.family == Family::Tarr && std::isnan(spec.threshold))
    throw argument_error("tarr: threshold unresolved; fit() resolves it to the sample mean");
  FitData d;
  d.spec = spec;
  d.series = series;
  d.t0 = start_index(spec);
  const std::size_t n = series.size();
  const bool lognormal = spec.innovation == Innovation::Lognormal;
  if (is_directional(spec.family)) {
    d.ru.resize(n);
    d.rd.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      d.ru[i] = series[i].ru;
      d.rd[i] = series[i].rd;
    }
    d.init_ru = mean_of(d.ru);
    d.init_rd = mean_of(d.rd);
    if (lognormal) {
      d.log_ru.resize(n);
      d.log_rd.resize(n);
      for (std::size_t i = d.t0; i < n; ++i) {
        if (!(d.ru[i] > 0.0) || !(d.rd[i] > 0.0))
          throw data_error("fit: lognormal innovations require positive component ranges; "
                           "index " + std::to_string(i) + " has a zero (component series "
                           "usually contain zeros, so directional models are normally fit "
                           "with exponential innovations)");
        d.log_ru[i] = std::log(d.ru[i]);
        d.log_rd[i] = std::log(d.rd[i]);
      }
    }
    d.lam.resize(n);
    d.lam2.resize(n);
    d.terms.resize(n - d.t0);
    d.terms2.resize(n - d.t0);
  } else {
    d.r.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.r[i] = series[i].r;
    d.init_r = mean_of(d.r);
    if (lognormal) {
      d.log_r.resize(n);
      for (std::size_t i = d.t0; i < n; ++i) {
        if (!(d.r[i] > 0.0))
          throw data_error("fit: lognormal innovations require positive ranges; index " +
                           std::to_string(i) +
                           " is zero (use --zero-floor to replace zero ranges on ingestion)");
        d.log_r[i] = std::log(d.r[i]);
      }
    }
    d.branch.assign(n, 0);
    if (spec.family == Family::Tacarr) {
      const auto regimes = regime_path(series, spec.l);
      for (std::size_t t = d.t0; t < n; ++t)
        d.branch[t] = regimes[t] == Regime::Up ? 0 : 1;
    } else if (spec.family == Family::Tarr) {
      for (std::size_t t = d.t0; t < n; ++t)
        d.branch[t] = d.r[t - static_cast<std::size_t>(spec.delay)] >= spec.threshold ? 0 : 1;
    }
    d.lam.resize(n);
    d.terms.resize(n - d.t0);
  }
  return d;
}

inline bool feasible(const ModelSpec& spec, std::span<const double> flat) {
  std::size_t k = 0;
  for (int b = 0; b < n_branches(spec.family); ++b) {
    if (!(flat[k++] > 0.0)) return false;
    double coef_sum = 0.0;
    for (int i = 0; i < spec.p + spec.q; ++i, ++k) {
      if (flat[k] < 0.0) return false;
      coef_sum += flat[k];
    }
    if (spec.constraints == ConstraintMode::Stationary && !(coef_sum < 1.0)) return false;
    if (has_gamma(spec))
      for (int g = 0; g < spec.l; ++g, ++k)
        if (flat[k] < 0.0) return false;
    if (has_theta2(spec)) {
      if (!(flat[k] > 0.0)) return false;
      ++k;
    }
  }
  return true;
}

// Fast log-likelihood at a full flat parameter vector. Matches the public
// lambda-path + likelihood composition term by term (same floors, same
// pairwise summation) so the optimizer and the reported fit agree exactly.
// Returns -inf when the recursion or a term is not finite.
inline double fast_llf(const FitData& d, std::span<const double> flat) {
  const ModelSpec& spec = d.spec;
  const std::size_t n = d.series.size();
  const bool lognormal = spec.innovation == Innovation::Lognormal;
  constexpr double two_pi = 6.283185307179586476925286766559;
  const ParamVector pv = unflatten(spec, flat);

  if (!is_directional(spec.family)) {
    std::fill(d.lam.begin(), d.lam.begin() + static_cast<std::ptrdiff_t>(d.t0), d.init_r);
    double log_norm[2] = {0.0, 0.0};
    if (lognormal)
      for (std::size_t b = 0; b < pv.branches.size(); ++b)
        log_norm[b] = std::log(two_pi * pv.branches[b].theta2);
    for (std::size_t t = d.t0; t < n; ++t) {
      const BranchParams& bp = pv.branches[d.branch[t]];
      double lam = bp.omega;
      for (int i = 1; i <= spec.p; ++i)
        lam += bp.alpha[static_cast<std::size_t>(i - 1)] * d.r[t - static_cast<std::size_t>(i)];
      for (int j = 1; j <= spec.q; ++j)
        lam += bp.beta[static_cast<std::size_t>(j - 1)] * d.lam[t - static_cast<std::size_t>(j)];
      d.lam[t] = lam;
      const double fl = std::max(lam, kLambdaFloor);
      if (lognormal) {
        const double t2 = pv.branches[d.branch[t]].theta2;
        const double dev = d.log_r[t] - std::log(fl) + 0.5 * t2;
        d.terms[t - d.t0] = -0.5 * (log_norm[d.branch[t]] + 2.0 * d.log_r[t] + dev * dev / t2);
      } else {
        d.terms[t - d.t0] = -(std::log(fl) + d.r[t] / fl);
      }
    }
    const double llf = pairwise_sum(d.terms);
    return std::isfinite(llf) ? llf : -std::numeric_limits<double>::infinity();
  }

  // Directional: independent component recursions, FACARR adds opposite-lag
  // feedback terms.
  std::fill(d.lam.begin(), d.lam.begin() + static_cast<std::ptrdiff_t>(d.t0), d.init_ru);
  std::fill(d.lam2.begin(), d.lam2.begin() + static_cast<std::ptrdiff_t>(d.t0), d.init_rd);
  const BranchParams& bu = pv.branches[0];
  const BranchParams& bd = pv.branches[1];
  const double log_norm_u = lognormal ? std::log(two_pi * bu.theta2) : 0.0;
  const double log_norm_d = lognormal ? std::log(two_pi * bd.theta2) : 0.0;
  for (std::size_t t = d.t0; t < n; ++t) {
    double lu = bu.omega, ld = bd.omega;
    for (int i = 1; i <= spec.p; ++i) {
      lu += bu.alpha[static_cast<std::size_t>(i - 1)] * d.ru[t - static_cast<std::size_t>(i)];
      ld += bd.alpha[static_cast<std::size_t>(i - 1)] * d.rd[t - static_cast<std::size_t>(i)];
    }
    for (int j = 1; j <= spec.q; ++j) {
      lu += bu.beta[static_cast<std::size_t>(j - 1)] * d.lam[t - static_cast<std::size_t>(j)];
      ld += bd.beta[static_cast<std::size_t>(j - 1)] * d.lam2[t - static_cast<std::size_t>(j)];
    }
    if (spec.family == Family::Facarr)
      for (int g = 1; g <= spec.l; ++g) {
        lu += bu.gamma[static_cast<std::size_t>(g - 1)] * d.rd[t - static_cast<std::size_t>(g)];
        ld += bd.gamma[static_cast<std::size_t>(g - 1)] * d.ru[t - static_cast<std::size_t>(g)];
      }
    d.lam[t] = lu;
    d.lam2[t] = ld;
    const double flu = std::max(lu, kLambdaFloor);
    const double fld = std::max(ld, kLambdaFloor);
    if (lognormal) {
      const double du = d.log_ru[t] - std::log(flu) + 0.5 * bu.theta2;
      const double dd = d.log_rd[t] - std::log(fld) + 0.5 * bd.theta2;
      d.terms[t - d.t0] = -0.5 * (log_norm_u + 2.0 * d.log_ru[t] + du * du / bu.theta2);
      d.terms2[t - d.t0] = -0.5 * (log_norm_d + 2.0 * d.log_rd[t] + dd * dd / bd.theta2);
    } else {
      d.terms[t - d.t0] = -(std::log(flu) + d.ru[t] / flu);
      d.terms2[t - d.t0] = -(std::log(fld) + d.rd[t] / fld);
    }
  }
  const double llf = pairwise_sum(d.terms) + pairwise_sum(d.terms2);
  return std::isfinite(llf) ? llf : -std::numeric_limits<double>::infinity();
}

// Method-of-moments style default start.
inline std::vector<double> default_start(const FitData& d) {
  const ModelSpec& spec = d.spec;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(param_count(spec)));
  const auto theta2_guess = [&](std::span<const double> x, std::span<const double> log_x,
                                double mean_x) {
    if (log_x.empty() || !(mean_x > 0.0)) return 0.25;
    std::vector<double> centered(x.size() - d.t0);
    const double log_mean = std::log(mean_x);
    for (std::size_t t = d.t0; t < x.size(); ++t) centered[t - d.t0] = log_x[t] - log_mean;
    const double v = variance_of(centered);
    return std::clamp(v, 0.01, 5.0);
  };
  for (int b = 0; b < n_branches(spec.family); ++b) {
    double mean_x = d.init_r;
    double t2 = 0.25;
    if (is_directional(spec.family)) {
      mean_x = b == 0 ? d.init_ru : d.init_rd;
      if (has_theta2(spec))
        t2 = b == 0 ? theta2_guess(d.ru, d.log_ru, d.init_ru)
                    : theta2_guess(d.rd, d.log_rd, d.init_rd);
    } else if (has_theta2(spec)) {
      t2 = theta2_guess(d.r, d.log_r, d.init_r);
    }
    flat.push_back(0.1 * std::max(mean_x, 1e-6));
    for (int i = 0; i < spec.p; ++i) flat.push_back(0.2 / spec.p);
    for (int j = 0; j < spec.q; ++j) flat.push_back(0.6 / spec.q);
    if (has_gamma(spec))
      for (int g = 0; g < spec.l; ++g) flat.push_back(0.05 / spec.l);
    if (has_theta2(spec)) flat.push_back(t2);
  }
  return flat;
}

// Symmetric positive-definite inverse via Cholesky; returns false when the
// matrix is not positive definite.
inline bool cholesky_inverse(std::vector<double>& a, std::size_t n) {
  std::vector<double> chol(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol[i * n + k] * chol[j * n + k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        chol[i * n + i] = std::sqrt(s);
      } else {
        chol[i * n + j] = s / chol[j * n + j];
      }
    }
  }
  // Invert L in place, then form (L^-1)' (L^-1).
  std::vector<double> inv_l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    inv_l[i * n + i] = 1.0 / chol[i * n + i];
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      for (std::size_t k = j; k < i; ++k) s -= chol[i * n + k] * inv_l[k * n + j];
      inv_l[i * n + j] = s / chol[i * n + i];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = i; k < n; ++k) s += inv_l[k * n + i] * inv_l[k * n + j];
      a[i * n + j] = a[j * n + i] = s;
    }
  return true;
}

}  // namespace detail

struct SeResult {
  std::vector<double> se;  // aligned with the full flat layout; NaN = unavailable/fixed
  bool available = false;
  std::string note;
};

// Hessian-based standard errors: central-difference Hessian of the negative
// log-likelihood at the optimum (relative step 1e-4 per parameter), inverted
// via Cholesky. Reported unavailable - never fabricated - when the Hessian is
// singular or indefinite.
inline SeResult standard_errors(std::span<const RangeObs> series, const ModelSpec& spec,
                                std::span<const double> flat,
                                const std::vector<std::optional<double>>& fixed = {}) {
  const detail::FitData data = detail::make_fit_data(series, spec);
  const std::size_t dim = flat.size();
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < dim; ++i)
    if (fixed.size() <= i || !fixed[i]) free_idx.push_back(i);
  const std::size_t k = free_idx.size();

  SeResult out;
  out.se.assign(dim, std::numeric_limits<double>::quiet_NaN());
  if (k == 0) {
    out.note = "all parameters fixed";
    return out;
  }

  std::vector<double> x(flat.begin(), flat.end());
  const auto neg_llf = [&](std::span<const double> v) { return -detail::fast_llf(data, v); };
  std::vector<double> h(k);
  for (std::size_t i = 0; i < k; ++i)
    h[i] = 1e-4 * std::max(std::fabs(x[free_idx[i]]), 1e-3);

  const double f0 = neg_llf(x);
  std::vector<double> hess(k * k, 0.0);
  bool finite = std::isfinite(f0);
  const auto shifted = [&](std::size_t i, double di, std::size_t j, double dj) {
    std::vector<double> v(x);
    v[free_idx[i]] += di;
    if (i != j) v[free_idx[j]] += dj;
    const double f = neg_llf(v);
    finite = finite && std::isfinite(f);
    return f;
  };
  for (std::size_t i = 0; i < k && finite; ++i) {
    const double fp = shifted(i, h[i], i, 0.0);
    const double fm = shifted(i, -h[i], i, 0.0);
    hess[i * k + i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i && finite; ++j) {
      const double fpp = shifted(i, h[i], j, h[j]);
      const double fpm = shifted(i, h[i], j, -h[j]);
      const double fmp = shifted(i, -h[i], j, h[j]);
      const double fmm = shifted(i, -h[i], j, -h[j]);
      hess[i * k + j] = hess[j * k + i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  if (!finite) {
    out.note = "log-likelihood not finite near the optimum; standard errors unavailable";
    return out;
  }
  if (!detail::cholesky_inverse(hess, k)) {
    out.note = "Hessian not positive definite at the optimum; standard errors unavailable";
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double v = hess[i * k + i];
    if (!(v > 0.0)) {
      out.note = "non-positive variance estimate; standard errors unavailable";
      out.se.assign(dim, std::numeric_limits<double>::quiet_NaN());
      return out;
    }
    out.se[free_idx[i]] = std::sqrt(v);
  }
  out.available = true;
  return out;
}

// Maximum-likelihood fit of `spec` to the series. Returns the best feasible
// local optimum across the seeded starts; a fit that exhausts max_iter on the
// winning start is returned with converged=false, never silently.
inline FitResult fit(std::span<const RangeObs> series, const ModelSpec& spec_in,
                     const FitOptions& opts = {}) {
  ModelSpec spec = spec_in;
  validate_spec(spec);
  detail::check_series_finite(series);
  if (opts.n_start < 1) throw argument_error("fit: n_start must be >= 1");

  const std::size_t t0 = start_index(spec);
  if (series.size() <= t0)
    throw argument_error("fit: series length must exceed max(p, q, l)");

  // TARR threshold default: the in-sample unconditional mean range.
  if (spec.family == Family::Tarr && std::isnan(spec.threshold)) {
    std::vector<double> r(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) r[i] = series[i].r;
    spec.threshold = mean_of(r);
  }

  const detail::FitData data = detail::make_fit_data(series, spec);
  const std::size_t dim = static_cast<std::size_t>(param_count(spec));
  std::vector<std::optional<double>> fixed = opts.fixed;
  fixed.resize(dim);
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < dim; ++i)
    if (!fixed[i]) free_idx.push_back(i);
  const int k = static_cast<int>(free_idx.size());
  if (k == 0) throw argument_error("fit: no free parameters");

  const std::size_t n_eff = series.size() - t0;
  if (opts.min_obs_per_param > 0 &&
      n_eff < static_cast<std::size_t>(opts.min_obs_per_param) * static_cast<std::size_t>(k))
    throw argument_error("fit: effective sample too small (" + std::to_string(n_eff) + " < " +
                         std::to_string(opts.min_obs_per_param) + " x " + std::to_string(k) +
                         " free parameters); lower min_obs_per_param to override");

  const auto expand = [&](std::span<const double> xfree) {
    std::vector<double> full(dim);
    for (std::size_t i = 0; i < dim; ++i)
      if (fixed[i]) full[i] = *fixed[i];
    for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = xfree[i];
    return full;
  };

  // Penalized objective: retract onto the feasible set, re-impose frozen
  // values, and add the squared retraction distance so the simplex is pulled
  // back inside.
  const auto objective = [&](std::span<const double> xfree) {
    std::vector<double> full = expand(xfree);
    const double dist2 = project_feasible(spec, full);
    for (std::size_t i = 0; i < dim; ++i)
      if (fixed[i]) full[i] = *fixed[i];
    if (!detail::feasible(spec, full)) return std::numeric_limits<double>::max();
    return -detail::fast_llf(data, full) + 1e6 * dist2;
  };

  // Start points: warm start first when provided, then the method-of-moments
  // base, then jittered copies of the base.
  std::vector<double> base = detail::default_start(data);
  project_feasible(spec, base);
  std::vector<std::vector<double>> starts;
  if (opts.warm_start) {
    if (opts.warm_start->size() != dim)
      throw argument_error("fit: warm_start has the wrong parameter count");
    starts.push_back(*opts.warm_start);
    project_feasible(spec, starts.back());
  }
  if (static_cast<int>(starts.size()) < opts.n_start) starts.push_back(base);
  for (int s = static_cast<int>(starts.size()); s < opts.n_start; ++s) {
    Rng rng(Rng::derive(opts.seed, static_cast<std::uint64_t>(s)));
    std::vector<double> x = base;
    for (double& v : x) v *= 1.0 + (rng.uniform() - 0.5);
    project_feasible(spec, x);
    starts.push_back(std::move(x));
  }

  NelderMeadOptions nm_opts;
  nm_opts.max_iter = opts.max_iter;
  nm_opts.param_tol = opts.param_tol;
  nm_opts.value_tol = opts.value_tol;

  std::vector<NelderMeadResult> runs(starts.size());
  parallel_for(starts.size(), opts.jobs, [&](std::size_t s) {
    std::vector<double> x0(free_idx.size()), step(free_idx.size());
    for (std::size_t i = 0; i < free_idx.size(); ++i) {
      x0[i] = starts[s][free_idx[i]];
      step[i] = std::max(0.1 * std::fabs(x0[i]), 0.02);
    }
    runs[s] = nelder_mead(objective, x0, step, nm_opts);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s)
    if (runs[s].value < runs[best].value) best = s;

  FitResult out;
  out.spec = spec;
  out.names = param_names(spec);
  out.n_eff = n_eff;
  out.k = k;
  out.best_start = static_cast<int>(best);
  out.converged = runs[best].converged;
  for (const auto& run : runs) out.evaluations += run.evaluations;

  std::vector<double> full = expand(runs[best].x);
  project_feasible(spec, full);
  for (std::size_t i = 0; i < dim; ++i)
    if (fixed[i]) full[i] = *fixed[i];
  out.flat = full;
  out.params = unflatten(spec, full);

  out.path = eval_lambda(series, out.params, spec);
  out.llf = model_loglik(series, out.path, out.params, spec);
  const auto [aic, bic] = information_criteria(out.llf, out.k, out.n_eff);
  out.aic = aic;
  out.bic = bic;

  const auto column = [&](auto proj) {
    std::vector<double> v(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) v[i] = proj(series[i]);
    return v;
  };
  out.residuals = standardized_residuals(column([](const RangeObs& o) { return o.r; }),
                                         out.path.total);
  if (is_directional(spec.family)) {
    out.residuals_up =
        standardized_residuals(column([](const RangeObs& o) { return o.ru; }), *out.path.up);
    out.residuals_down =
        standardized_residuals(column([](const RangeObs& o) { return o.rd; }), *out.path.down);
  }

  const SeResult se = standard_errors(series, spec, out.flat, fixed);
  out.std_errors = se.se;
  out.se_available = se.available;
  out.se_note = se.note;
  return out;
}

}  // namespace rangevol
