#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/likelihood.hpp"
#include "rangevol/model.hpp"
#include "rangevol/stats.hpp"

// Residual and forecast-comparison tests: Kolmogorov-Smirnov against the
// fitted innovation law, Ljung-Box for serial correlation, Diebold-Mariano
// for equal predictive accuracy.
namespace rangevol {

struct TestReport {
  std::string test;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  int lags = 0;        // Ljung-Box only
  std::string detail;  // regime subset, reference law, conventions, warnings
};

enum class KsMode { PerRegime, PooledPit };
enum class LossKind { Squared, Absolute };

namespace detail {

inline double ks_statistic_sorted(std::span<const double> sorted, auto cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                             f - static_cast<double>(i) / n));
  }
  return d;
}

inline double law_cdf(double x, Innovation law, double theta2) {
  return law == Innovation::Exponential ? exponential_cdf(x)
                                        : lognormal_mean_one_cdf(x, theta2);
}

}  // namespace detail

inline constexpr std::size_t kKsMinRegimeSize = 10;

// Goodness of fit of standardized residuals against the innovation law.
//
// PerRegime: one KS statistic per regime against that regime's fitted law;
// the report keeps the larger statistic (p-value from that regime's own n).
// Regimes with fewer than 10 residuals are skipped with a warning.
//
// PooledPit: residuals are mapped through their own regime's fitted CDF and
// the pooled transforms are tested against Uniform(0,1).
//
// P-values use the asymptotic Kolmogorov distribution of sqrt(n) * D.
inline TestReport ks_test(std::span<const double> eps, std::span<const Regime> regimes,
                          Innovation law, std::span<const double> theta2_by_branch,
                          KsMode mode = KsMode::PooledPit) {
  if (eps.size() != regimes.size()) throw argument_error("ks_test: eps/regime length mismatch");
  if (eps.empty()) throw argument_error("ks_test: empty residual series");
  for (double e : eps)
    if (!(e > 0.0)) throw argument_error("ks_test: residuals must be > 0");
  if (law == Innovation::Lognormal && theta2_by_branch.empty())
    throw argument_error("ks_test: lognormal law requires theta2");

  const auto theta2_of = [&](Regime m) {
    if (law == Innovation::Exponential) return 1.0;
    if (theta2_by_branch.size() == 1) return theta2_by_branch[0];
    return theta2_by_branch[m == Regime::Up ? 0 : 1];
  };

  TestReport rep;
  rep.test = "ks";

  if (mode == KsMode::PooledPit) {
    std::vector<double> pit(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i)
      pit[i] = detail::law_cdf(eps[i], law, theta2_of(regimes[i]));
    std::sort(pit.begin(), pit.end());
    rep.statistic = detail::ks_statistic_sorted(pit, [](double u) { return u; });
    rep.n = pit.size();
    rep.p_value = kolmogorov_sf(std::sqrt(static_cast<double>(rep.n)) * rep.statistic);
    rep.detail = std::string("pooled PIT vs uniform; law=") + innovation_name(law);
    return rep;
  }

  std::string notes;
  bool any = false;
  for (const Regime m : {Regime::Up, Regime::Down}) {
    std::vector<double> sub;
    for (std::size_t i = 0; i < eps.size(); ++i)
      if (regimes[i] == m) sub.push_back(eps[i]);
    if (sub.empty() && m == Regime::Down) continue;  // single-regime input
    if (sub.size() < kKsMinRegimeSize) {
      notes += std::string(notes.empty() ? "" : "; ") + regime_name(m) +
               " regime skipped (n=" + std::to_string(sub.size()) + " < " +
               std::to_string(kKsMinRegimeSize) + ")";
      continue;
    }
    std::sort(sub.begin(), sub.end());
    const double t2 = theta2_of(m);
    const double d =
        detail::ks_statistic_sorted(sub, [&](double x) { return detail::law_cdf(x, law, t2); });
    const double p = kolmogorov_sf(std::sqrt(static_cast<double>(sub.size())) * d);
    if (!any || d > rep.statistic) {
      rep.statistic = d;
      rep.p_value = p;
      rep.n = sub.size();
      rep.detail = std::string("per-regime max; worst=") + regime_name(m) +
                   "; law=" + innovation_name(law);
    }
    any = true;
  }
  if (!any)
    throw argument_error("ks_test: no regime has the minimum of " +
                         std::to_string(kKsMinRegimeSize) + " residuals");
  if (!notes.empty()) rep.detail += "; " + notes;
  return rep;
}

// Ljung-Box portmanteau statistic Q(h) = n(n+2) sum_k rho_k^2 / (n-k) with a
// chi-squared(h) p-value (no parameter-count correction).
inline TestReport ljung_box(std::span<const double> x, int lags) {
  if (lags < 1) throw argument_error("ljung_box: lags must be >= 1");
  if (x.size() <= static_cast<std::size_t>(lags))
    throw argument_error("ljung_box: series must be longer than the lag count");
  const auto rho = autocorrelations(x, lags);  // throws numeric_error on zero variance
  const double n = static_cast<double>(x.size());
  double q = 0.0;
  for (int k = 1; k <= lags; ++k)
    q += rho[static_cast<std::size_t>(k - 1)] * rho[static_cast<std::size_t>(k - 1)] /
         (n - static_cast<double>(k));
  q *= n * (n + 2.0);
  TestReport rep;
  rep.test = "ljung_box";
  rep.statistic = q;
  rep.p_value = chi_squared_sf(q, lags);
  rep.n = x.size();
  rep.lags = lags;
  rep.detail = "Q(" + std::to_string(lags) + ")";
  return rep;
}

// Diebold-Mariano test of equal predictive accuracy for one-step forecasts.
// Loss differential d_t = L(e_B,t) - L(e_A,t); the statistic is
// mean(d) / sqrt(lrv/n). At horizon one the long-run variance is the plain
// sample variance (hac_lags = 0, the default); hac_lags > 0 switches to the
// Newey-West estimator with Bartlett weights for multi-step work. Positive
// values favor A; the one-sided p-value tests the alternative "A is more
// accurate". Identical sequences report "no difference" with p = 1 by
// convention.
inline TestReport dm_test(std::span<const double> errors_a, std::span<const double> errors_b,
                          LossKind loss = LossKind::Squared, int hac_lags = 0) {
  if (errors_a.size() != errors_b.size())
    throw argument_error("dm_test: forecast-error sequences differ in length");
  if (errors_a.size() < 10) throw argument_error("dm_test: need at least 10 forecast errors");
  if (hac_lags < 0) throw argument_error("dm_test: hac_lags must be >= 0");
  const std::size_t n = errors_a.size();
  if (hac_lags >= static_cast<int>(n)) throw argument_error("dm_test: hac_lags must be < n");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double la = loss == LossKind::Squared ? errors_a[i] * errors_a[i] : std::fabs(errors_a[i]);
    const double lb = loss == LossKind::Squared ? errors_b[i] * errors_b[i] : std::fabs(errors_b[i]);
    d[i] = lb - la;
  }
  const double mean_d = mean_of(d);
  double lrv = variance_of(d);
  for (int k = 1; k <= hac_lags; ++k) {
    double gamma_k = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t)
      gamma_k += (d[t] - mean_d) * (d[t - static_cast<std::size_t>(k)] - mean_d);
    gamma_k /= static_cast<double>(n);
    lrv += 2.0 * (1.0 - static_cast<double>(k) / (hac_lags + 1.0)) * gamma_k;
  }
  TestReport rep;
  rep.test = "dm";
  rep.n = n;
  rep.detail = std::string("loss=") + (loss == LossKind::Squared ? "squared" : "absolute") +
               "; positive statistic favors A; one-sided alternative: A more accurate";
  if (hac_lags > 0) rep.detail += "; Newey-West lags=" + std::to_string(hac_lags);
  if (lrv == 0.0) {
    if (mean_d == 0.0) {
      rep.statistic = 0.0;
      rep.p_value = 1.0;
      rep.detail += "; degenerate: no difference";
      return rep;
    }
    throw numeric_error("dm_test: zero-variance loss differential with nonzero mean");
  }
  if (!(lrv > 0.0)) throw numeric_error("dm_test: long-run variance estimate is negative");
  rep.statistic = mean_d / std::sqrt(lrv / static_cast<double>(n));
  rep.p_value = 1.0 - normal_cdf(rep.statistic);
  return rep;
}

}  // namespace rangevol
