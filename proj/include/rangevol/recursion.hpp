#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/model.hpp"
#include "rangevol/range.hpp"

// Conditional-mean recursions. One step engine drives every family so that
// the in-sample path builders and the one-step-ahead forecaster cannot drift
// apart.
namespace rangevol {

// Pre-sample lambda values. By default they are filled with the in-sample
// mean of the driving series; a fixed value can be supplied instead (the
// simulator and tests use this to replay paths exactly).
struct LambdaInit {
  std::optional<double> fixed;
};

struct LambdaPath {
  std::vector<double> lambda;  // one value per observation; burn-in fill before `start`
  std::vector<Regime> regime;  // branch used per period (placeholder before `start`)
  std::size_t start = 0;       // first model-defined index
};

// Both conditional-mean components of a fitted model. For CARR/TARR/TACARR
// only `total` is populated; ACARR/FACARR carry the two directional paths and
// `total` holds their sum (the conditional mean of the full range).
struct ModelPath {
  LambdaPath total;
  std::optional<LambdaPath> up;
  std::optional<LambdaPath> down;
};

namespace detail {

inline void check_series_finite(std::span<const RangeObs> series) {
  for (const auto& o : series)
    if (!std::isfinite(o.r) || !std::isfinite(o.ru) || !std::isfinite(o.rd))
      throw numeric_error("range series contains non-finite values");
}

// Branch selector at position t (valid for t in [start_index, series.size()]).
inline int select_branch(std::span<const RangeObs> series, std::size_t t, const ModelSpec& spec) {
  switch (spec.family) {
    case Family::Carr:
      return 0;
    case Family::Tarr: {
      if (std::isnan(spec.threshold))
        throw argument_error("tarr: threshold unresolved; fit() resolves it to the sample mean");
      const double z = series[t - static_cast<std::size_t>(spec.delay)].r;
      return z >= spec.threshold ? 0 : 1;
    }
    case Family::Tacarr: {
      const auto window =
          series.subspan(t - static_cast<std::size_t>(spec.l), static_cast<std::size_t>(spec.l));
      return classify_regime(window, spec.l) == Regime::Up ? 0 : 1;
    }
    default:
      throw argument_error("select_branch: directional family has no regime branch");
  }
}

// One recursion step on the total range: lambda_t from lagged ranges and
// lagged realized lambdas. Valid for t == series.size() (the one-step-ahead
// position) as long as the lag windows stay inside the arrays.
inline std::pair<double, int> lambda_step_total(std::span<const RangeObs> series,
                                                std::span<const double> lambda_history,
                                                std::size_t t, const ParamVector& params,
                                                const ModelSpec& spec) {
  const int branch = select_branch(series, t, spec);
  const BranchParams& bp = params.branches[static_cast<std::size_t>(branch)];
  double lam = bp.omega;
  for (int i = 1; i <= spec.p; ++i) lam += bp.alpha[static_cast<std::size_t>(i - 1)] * series[t - static_cast<std::size_t>(i)].r;
  for (int j = 1; j <= spec.q; ++j) lam += bp.beta[static_cast<std::size_t>(j - 1)] * lambda_history[t - static_cast<std::size_t>(j)];
  return {lam, branch};
}

// One recursion step for a directional component (ACARR/FACARR). `own`
// selects the branch's own series (ru for u, rd for d); the opposite series
// feeds the FACARR gamma terms.
inline double lambda_step_directional(std::span<const RangeObs> series,
                                      std::span<const double> lambda_history, std::size_t t,
                                      const BranchParams& bp, const ModelSpec& spec, bool up) {
  double lam = bp.omega;
  for (int i = 1; i <= spec.p; ++i) {
    const RangeObs& obs = series[t - static_cast<std::size_t>(i)];
    lam += bp.alpha[static_cast<std::size_t>(i - 1)] * (up ? obs.ru : obs.rd);
  }
  for (int j = 1; j <= spec.q; ++j) lam += bp.beta[static_cast<std::size_t>(j - 1)] * lambda_history[t - static_cast<std::size_t>(j)];
  if (spec.family == Family::Facarr)
    for (int k = 1; k <= spec.l; ++k) {
      const RangeObs& obs = series[t - static_cast<std::size_t>(k)];
      lam += bp.gamma[static_cast<std::size_t>(k - 1)] * (up ? obs.rd : obs.ru);
    }
  return lam;
}

inline double resolve_init(std::span<const double> values, const LambdaInit& init) {
  if (init.fixed) {
    if (!(*init.fixed > 0.0)) throw argument_error("lambda init: fixed value must be > 0");
    return *init.fixed;
  }
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace detail

// Shared-path recursion for CARR, TARR and TACARR. Pre-sample lambdas are the
// burn-in fill; from start_index on, each step applies the branch selected by
// the family's regime rule to lagged total ranges and the realized lambda
// path (not branch-specific shadow paths).
inline LambdaPath lambda_total_path(std::span<const RangeObs> series, const ParamVector& params,
                                    const ModelSpec& spec, const LambdaInit& init = {}) {
  validate_spec(spec);
  validate_params(spec, params);
  detail::check_series_finite(series);
  if (is_directional(spec.family))
    throw argument_error("lambda_total_path: use lambda_directional_paths for ACARR/FACARR");
  const std::size_t t0 = start_index(spec);
  if (series.size() <= t0)
    throw argument_error("lambda path: series length must exceed max(p, q, l)");

  std::vector<double> r(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) r[i] = series[i].r;

  LambdaPath path;
  path.start = t0;
  path.lambda.assign(series.size(), detail::resolve_init(r, init));
  path.regime.assign(series.size(), Regime::Up);
  for (std::size_t t = t0; t < series.size(); ++t) {
    const auto [lam, branch] = detail::lambda_step_total(series, path.lambda, t, params, spec);
    if (!std::isfinite(lam)) throw numeric_error("lambda recursion produced a non-finite value");
    path.lambda[t] = lam;
    path.regime[t] = branch == 0 ? Regime::Up : Regime::Down;
  }
  return path;
}

// Independent directional recursions for ACARR/FACARR; first = upward
// component, second = downward. Regime labels are fixed per component (Up for
// the upward path, Down for the downward one) so per-component diagnostics
// keep their law association.
inline std::pair<LambdaPath, LambdaPath> lambda_directional_paths(
    std::span<const RangeObs> series, const ParamVector& params, const ModelSpec& spec,
    const LambdaInit& init = {}) {
  validate_spec(spec);
  validate_params(spec, params);
  detail::check_series_finite(series);
  if (!is_directional(spec.family))
    throw argument_error("lambda_directional_paths: family is not ACARR/FACARR");
  const std::size_t t0 = start_index(spec);
  if (series.size() <= t0)
    throw argument_error("lambda path: series length must exceed max(p, q, l)");

  std::vector<double> ru(series.size()), rd(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    ru[i] = series[i].ru;
    rd[i] = series[i].rd;
  }

  LambdaPath up, down;
  up.start = down.start = t0;
  up.lambda.assign(series.size(), detail::resolve_init(ru, init));
  down.lambda.assign(series.size(), detail::resolve_init(rd, init));
  up.regime.assign(series.size(), Regime::Up);
  down.regime.assign(series.size(), Regime::Down);
  for (std::size_t t = t0; t < series.size(); ++t) {
    const double lu =
        detail::lambda_step_directional(series, up.lambda, t, params.branches[0], spec, true);
    const double ld =
        detail::lambda_step_directional(series, down.lambda, t, params.branches[1], spec, false);
    if (!std::isfinite(lu) || !std::isfinite(ld))
      throw numeric_error("lambda recursion produced a non-finite value");
    up.lambda[t] = lu;
    down.lambda[t] = ld;
  }
  return {std::move(up), std::move(down)};
}

// Family dispatcher. For directional families `total` is the pointwise sum of
// the two component paths.
inline ModelPath eval_lambda(std::span<const RangeObs> series, const ParamVector& params,
                             const ModelSpec& spec, const LambdaInit& init = {}) {
  ModelPath out;
  if (is_directional(spec.family)) {
    auto [up, down] = lambda_directional_paths(series, params, spec, init);
    out.total.start = up.start;
    out.total.lambda.resize(series.size());
    for (std::size_t t = 0; t < series.size(); ++t)
      out.total.lambda[t] = up.lambda[t] + down.lambda[t];
    out.total.regime.assign(series.size(), Regime::Up);
    out.up = std::move(up);
    out.down = std::move(down);
  } else {
    out.total = lambda_total_path(series, params, spec, init);
  }
  return out;
}

// Maximum absolute violation of the moving-average rearrangement
//   R_t = omega^(m) + sum_{i<=k} (alpha_i + beta_i) R_{t-i}
//         - sum_{j<=q} beta_j eta_{t-j} + eta_t,   eta_t = R_t - lambda_t,
// with k = max(p, q) and coefficients zero-padded past their declared order.
// Checked at every t where all referenced eta terms are defined; expected to
// vanish up to rounding for any path produced by lambda_total_path.
inline double arma_residual_check(std::span<const RangeObs> series, const LambdaPath& path,
                                  const ParamVector& params, const ModelSpec& spec) {
  if (is_directional(spec.family))
    throw argument_error("arma_residual_check: defined for total-range families only");
  if (path.lambda.size() != series.size())
    throw argument_error("arma_residual_check: path/series length mismatch");
  const std::size_t t0 = path.start;
  const int k = std::max(spec.p, spec.q);
  std::vector<double> eta(series.size(), 0.0);
  for (std::size_t t = t0; t < series.size(); ++t) eta[t] = series[t].r - path.lambda[t];

  double worst = 0.0;
  for (std::size_t t = t0 + static_cast<std::size_t>(spec.q); t < series.size(); ++t) {
    const BranchParams& bp =
        params.branches[path.regime[t] == Regime::Up ? 0 : (params.branches.size() > 1 ? 1 : 0)];
    double rhs = bp.omega + eta[t];
    for (int i = 1; i <= k; ++i) {
      const double a = i <= spec.p ? bp.alpha[static_cast<std::size_t>(i - 1)] : 0.0;
      const double b = i <= spec.q ? bp.beta[static_cast<std::size_t>(i - 1)] : 0.0;
      rhs += (a + b) * series[t - static_cast<std::size_t>(i)].r;
    }
    for (int j = 1; j <= spec.q; ++j)
      rhs -= bp.beta[static_cast<std::size_t>(j - 1)] * eta[t - static_cast<std::size_t>(j)];
    worst = std::max(worst, std::fabs(series[t].r - rhs));
  }
  return worst;
}

}  // namespace rangevol
