#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/estimate.hpp"
#include "rangevol/model.hpp"
#include "rangevol/range.hpp"
#include "rangevol/recursion.hpp"

// Rolling-window one-step-ahead forecasting and in-sample accuracy.
// The one-step forecast of R_{N+1} is the conditional mean lambda_{N+1}
// evaluated one position past the window end, with the regime decided by the
// observed up/down ranges of the window's last l days.
namespace rangevol {

struct ForecastValue {
  double lambda = 0.0;
  Regime regime = Regime::Up;
};

inline ForecastValue one_step_forecast(std::span<const RangeObs> window,
                                       const ParamVector& params, const ModelSpec& spec,
                                       const LambdaInit& init = {}) {
  validate_spec(spec);
  const std::size_t n = window.size();
  if (n <= start_index(spec))
    throw argument_error("one_step_forecast: window shorter than max(p, q, l) + 1");
  ForecastValue out;
  if (is_directional(spec.family)) {
    auto [up, down] = lambda_directional_paths(window, params, spec, init);
    const double lu =
        detail::lambda_step_directional(window, up.lambda, n, params.branches[0], spec, true);
    const double ld =
        detail::lambda_step_directional(window, down.lambda, n, params.branches[1], spec, false);
    out.lambda = lu + ld;
    out.regime = Regime::Up;
    return out;
  }
  const LambdaPath path = lambda_total_path(window, params, spec, init);
  const auto [lam, branch] = detail::lambda_step_total(window, path.lambda, n, params, spec);
  if (!std::isfinite(lam) || !(lam > 0.0))
    throw numeric_error("one_step_forecast: non-positive or non-finite forecast");
  out.lambda = lam;
  out.regime = branch == 0 ? Regime::Up : Regime::Down;
  return out;
}

struct ForecastStep {
  std::size_t origin = 0;  // index of the forecast target in the full series
  double realized = 0.0;
  double forecast = 0.0;
  Regime regime = Regime::Up;
  bool refit = false;      // parameters re-estimated at this step
  bool converged = false;  // convergence of the parameters in effect
  double llf = 0.0;        // log-likelihood of the fit in effect
};

struct ForecastRun {
  std::size_t window_length = 0;
  int refit_every = 1;
  std::vector<ForecastStep> steps;
  std::vector<std::vector<double>> step_params;  // flat parameters in effect per step
  double rmse = 0.0, mae = 0.0;
};

// Rolling one-step-ahead forecasts: fit on the trailing window, forecast the
// next observation, advance by one. Refits are warm-started at the previous
// estimates; refit_every > 1 reuses parameters between refits. A step whose
// refit fails to converge keeps the best-found parameters and is flagged.
inline ForecastRun rolling_forecast(std::span<const RangeObs> series, const ModelSpec& spec,
                                    std::size_t window_length, const FitOptions& opts = {},
                                    int refit_every = 1) {
  validate_spec(spec);
  if (refit_every < 1) throw argument_error("rolling_forecast: refit_every must be >= 1");
  if (window_length >= series.size())
    throw argument_error("rolling_forecast: window must be shorter than the series");
  if (window_length <= start_index(spec))
    throw argument_error("rolling_forecast: window shorter than max(p, q, l) + 1");

  ForecastRun run;
  run.window_length = window_length;
  run.refit_every = refit_every;
  const std::size_t horizon = series.size() - window_length;
  run.steps.reserve(horizon);
  run.step_params.reserve(horizon);

  FitResult current;
  bool have_fit = false;
  for (std::size_t s = 0; s < horizon; ++s) {
    const auto window = series.subspan(s, window_length);
    const bool refit_now = !have_fit || (s % static_cast<std::size_t>(refit_every) == 0);
    if (refit_now) {
      FitOptions step_opts = opts;
      if (have_fit) {
        step_opts.warm_start = current.flat;
        step_opts.n_start = std::max(1, opts.refit_n_start);
      }
      ModelSpec window_spec = spec;  // NaN TARR threshold re-resolves per window
      current = fit(window, window_spec, step_opts);
      have_fit = true;
    }
    const ForecastValue value = one_step_forecast(window, current.params, current.spec);
    ForecastStep step;
    step.origin = s + window_length;
    step.realized = series[s + window_length].r;
    step.forecast = value.lambda;
    step.regime = value.regime;
    step.refit = refit_now;
    step.converged = current.converged;
    step.llf = current.llf;
    run.steps.push_back(step);
    run.step_params.push_back(current.flat);
  }

  std::vector<double> sq(run.steps.size()), ab(run.steps.size());
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    const double e = run.steps[i].realized - run.steps[i].forecast;
    sq[i] = e * e;
    ab[i] = std::fabs(e);
  }
  run.rmse = std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
  run.mae = pairwise_sum(ab) / static_cast<double>(ab.size());
  return run;
}

// In-sample accuracy of the fitted conditional mean: RMSE and MAE of
// R_t - lambda_t over the model-defined span.
inline std::pair<double, double> insample_accuracy(std::span<const RangeObs> series,
                                                   const ModelPath& path) {
  if (path.total.lambda.size() != series.size())
    throw argument_error("insample_accuracy: path/series length mismatch");
  const std::size_t t0 = path.total.start;
  std::vector<double> sq(series.size() - t0), ab(series.size() - t0);
  for (std::size_t t = t0; t < series.size(); ++t) {
    const double e = series[t].r - path.total.lambda[t];
    sq[t - t0] = e * e;
    ab[t - t0] = std::fabs(e);
  }
  const double n = static_cast<double>(sq.size());
  return {std::sqrt(pairwise_sum(sq) / n), pairwise_sum(ab) / n};
}

}  // namespace rangevol
