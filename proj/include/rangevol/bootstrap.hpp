#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rangevol/diagnostics.hpp"
#include "rangevol/estimate.hpp"
#include "rangevol/simulate.hpp"

namespace rangevol {

// Parametric-bootstrap p-value for the KS test with estimated parameters.
// The classical asymptotic p-value ignores estimation, which makes it
// conservative; this resamples the null: simulate from the fitted model,
// refit, recompute the KS statistic, and report the exceedance fraction
// (with the +1 correction). Only total-range families can be resampled.
inline TestReport ks_test_bootstrap(const FitResult& fitted, KsMode mode, int n_boot,
                                    std::uint64_t seed, const FitOptions& refit_opts,
                                    int jobs = 1) {
  if (n_boot < 1) throw argument_error("ks_test_bootstrap: n_boot must be >= 1");
  if (is_directional(fitted.spec.family))
    throw argument_error("ks_test_bootstrap: directional families cannot be resampled");

  const auto theta2 = detail::theta2_of(fitted.spec, fitted.params);
  const TestReport observed = ks_test(fitted.residuals.eps, fitted.residuals.regime,
                                      fitted.spec.innovation, theta2, mode);

  SimConfig config;
  config.spec = fitted.spec;
  config.params = fitted.params;
  config.length = fitted.residuals.eps.size() + fitted.residuals.start;
  config.burn_in = 500;
  config.seed = seed;

  std::vector<double> boot_stats(static_cast<std::size_t>(n_boot));
  FitOptions opts = refit_opts;
  opts.jobs = 1;
  parallel_for(static_cast<std::size_t>(n_boot), jobs, [&](std::size_t b) {
    SimConfig one = config;
    one.seed = Rng::derive(seed, b);
    const SimulatedPath path = simulate_path(one);
    FitOptions rep_opts = opts;
    rep_opts.seed = Rng::derive(one.seed, 0xb007ULL);
    const FitResult refit = fit(path.series, fitted.spec, rep_opts);
    const auto t2 = detail::theta2_of(refit.spec, refit.params);
    boot_stats[b] = ks_test(refit.residuals.eps, refit.residuals.regime,
                            refit.spec.innovation, t2, mode)
                        .statistic;
  });

  std::size_t exceed = 0;
  for (double d : boot_stats)
    if (d >= observed.statistic) ++exceed;

  TestReport rep = observed;
  rep.p_value =
      static_cast<double>(exceed + 1) / static_cast<double>(boot_stats.size() + 1);
  rep.detail += "; parametric bootstrap p-value (" + std::to_string(n_boot) + " refits)";
  return rep;
}

}  // namespace rangevol
