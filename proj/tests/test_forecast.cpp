#include "rangevol/forecast.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rangevol/rng.hpp"
#include "rangevol/simulate.hpp"

using namespace rangevol;

namespace {

ParamVector two_branch(double o1, double a1, double b1, double o2, double a2, double b2) {
  ParamVector p;
  p.branches.resize(2);
  p.branches[0] = {o1, {a1}, {b1}, {}, 0.0};
  p.branches[1] = {o2, {a2}, {b2}, {}, 0.0};
  return p;
}

SimConfig etacarr_config(std::size_t length, std::uint64_t seed) {
  SimConfig cfg;
  cfg.spec.family = Family::Tacarr;
  cfg.spec.innovation = Innovation::Exponential;
  cfg.params = two_branch(0.05, 0.15, 0.6, 0.12, 0.25, 0.5);
  cfg.length = length;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("zero-coefficient forecast is the branch constant") {
  std::vector<RangeObs> window(30, RangeObs{1.0, 0.7, 0.3});
  ModelSpec spec;
  spec.family = Family::Tacarr;
  const auto params = two_branch(0.42, 0.0, 0.0, 0.9, 0.0, 0.0);
  const auto value = one_step_forecast(window, params, spec);
  CHECK(value.lambda == 0.42);  // all days Up
  CHECK(value.regime == Regime::Up);
}

TEST_CASE("fitted-coefficient arithmetic for an Up day with unit state") {
  // Engineer the window so lambda_N = 1 and R_N = 1 on an Up day; the next
  // step is then omega + alpha + beta for the Up branch.
  ModelSpec spec;
  spec.family = Family::Tacarr;
  spec.constraints = ConstraintMode::PositivityOnly;  // published Down branch sums to 1
  const auto params = two_branch(0.0798, 0.1573, 0.7777, 0.0248, 0.2291, 0.7709);
  const double init = 1.0;
  const double r0 = (1.0 - 0.0798 - 0.7777 * init) / 0.1573;  // makes lambda_1 == 1
  std::vector<RangeObs> window = {{r0, 0.8 * r0, 0.2 * r0}, {1.0, 0.6, 0.4}};
  LambdaInit li;
  li.fixed = init;
  const auto value = one_step_forecast(window, params, spec, li);
  CHECK(value.regime == Regime::Up);
  CHECK(value.lambda == doctest::Approx(0.0798 + 0.1573 + 0.7777).epsilon(1e-12));
  CHECK(value.lambda == doctest::Approx(1.0148).epsilon(1e-12));
}

TEST_CASE("forecast equals the recursion on the extended series") {
  const auto sim = simulate_path(etacarr_config(300, 3));
  const auto& series = sim.series;
  const std::size_t n = series.size() - 1;
  const auto window = std::span<const RangeObs>(series).first(n);
  LambdaInit init;
  init.fixed = 0.8;
  const auto value = one_step_forecast(window, etacarr_config(0, 0).params,
                                       etacarr_config(0, 0).spec, init);
  const auto extended =
      lambda_total_path(series, etacarr_config(0, 0).params, etacarr_config(0, 0).spec, init);
  CHECK(value.lambda == doctest::Approx(extended.lambda[n]).epsilon(1e-12));
  CHECK(value.regime == extended.regime[n]);
}

TEST_CASE("directional forecast sums the component steps") {
  Rng rng(4);
  std::vector<RangeObs> window(60);
  for (auto& o : window) {
    o.ru = rng.exponential() * 0.5 + 0.01;
    o.rd = rng.exponential() * 0.8 + 0.01;
    o.r = o.ru + o.rd;
  }
  ModelSpec spec;
  spec.family = Family::Acarr;
  const auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
  const auto value = one_step_forecast(window, params, spec);
  const auto [up, down] = lambda_directional_paths(window, params, spec);
  const double lu = detail::lambda_step_directional(window, up.lambda, window.size(),
                                                    params.branches[0], spec, true);
  const double ld = detail::lambda_step_directional(window, down.lambda, window.size(),
                                                    params.branches[1], spec, false);
  CHECK(value.lambda == doctest::Approx(lu + ld).epsilon(1e-14));
}

TEST_CASE("forecast argument errors") {
  std::vector<RangeObs> tiny = {{1.0, 0.5, 0.5}};
  ModelSpec spec;
  spec.family = Family::Tacarr;
  spec.l = 5;
  const auto params = two_branch(0.1, 0.2, 0.5, 0.1, 0.2, 0.5);
  CHECK_THROWS_AS(one_step_forecast(tiny, params, spec), argument_error);
}

TEST_CASE("rolling forecast on a constant series is exact") {
  std::vector<RangeObs> series(220, RangeObs{2.0, 1.2, 0.8});
  ModelSpec spec;  // ECARR(1,1)
  FitOptions opts;
  opts.n_start = 3;
  opts.seed = 5;
  const auto run = rolling_forecast(series, spec, 200, opts, 1);
  CHECK(run.steps.size() == 20);
  for (const auto& s : run.steps) CHECK(s.forecast == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(run.rmse < 1e-3);
  CHECK(run.mae < 1e-3);
}

TEST_CASE("accuracy summaries recompute from the step errors") {
  const auto sim = simulate_path(etacarr_config(260, 6));
  ModelSpec spec = etacarr_config(0, 0).spec;
  FitOptions opts;
  opts.n_start = 3;
  opts.seed = 6;
  opts.min_obs_per_param = 0;
  const auto run = rolling_forecast(sim.series, spec, 240, opts, 4);
  REQUIRE(run.steps.size() == 20);
  double sq = 0.0, ab = 0.0;
  for (const auto& s : run.steps) {
    const double e = s.realized - s.forecast;
    sq += e * e;
    ab += std::fabs(e);
    CHECK(s.forecast > 0.0);
  }
  CHECK(run.rmse * run.rmse == doctest::Approx(sq / run.steps.size()).epsilon(1e-12));
  CHECK(run.mae == doctest::Approx(ab / run.steps.size()).epsilon(1e-12));
}

TEST_CASE("single-step horizon makes every refit cadence identical") {
  const auto sim = simulate_path(etacarr_config(241, 7));
  ModelSpec spec = etacarr_config(0, 0).spec;
  FitOptions opts;
  opts.n_start = 3;
  opts.seed = 7;
  const auto every = rolling_forecast(sim.series, spec, 240, opts, 1);
  const auto once = rolling_forecast(sim.series, spec, 240, opts, 1000000);
  REQUIRE(every.steps.size() == 1);
  REQUIRE(once.steps.size() == 1);
  CHECK(every.steps[0].forecast == once.steps[0].forecast);
}

TEST_CASE("frozen parameters make rolling forecasts match the shifted lambda path") {
  // With refits disabled after the first window and all parameters fixed, the
  // rolling forecast at each step equals the recursion evaluated one past the
  // window on identical data.
  const auto sim = simulate_path(etacarr_config(300, 8));
  const auto params = etacarr_config(0, 0).params;
  ModelSpec spec = etacarr_config(0, 0).spec;
  const std::size_t window = 280;
  FitOptions opts;
  opts.n_start = 1;
  const auto flat = flatten(spec, params);
  opts.fixed.assign(flat.size(), std::nullopt);
  for (std::size_t i = 0; i < flat.size(); ++i) opts.fixed[i] = flat[i];
  // All parameters frozen: k would be zero, so freeze all but one and pin it
  // by a degenerate bound instead. Simpler: freeze all but omega_up and give
  // the optimizer a single-start with the true value; it stays put.
  opts.fixed[0] = std::nullopt;
  opts.warm_start = flat;
  opts.min_obs_per_param = 0;
  const auto run = rolling_forecast(sim.series, spec, window, opts, 1000000);
  for (std::size_t s = 0; s < run.steps.size(); ++s) {
    const auto w = std::span<const RangeObs>(sim.series).subspan(s, window);
    const auto value = one_step_forecast(w, unflatten(spec, run.step_params[s]), spec);
    CHECK(run.steps[s].forecast == doctest::Approx(value.lambda).epsilon(1e-12));
  }
}

TEST_CASE("warm and cold refits agree on the log-likelihood") {
  const auto sim = simulate_path(etacarr_config(360, 9));
  ModelSpec spec = etacarr_config(0, 0).spec;
  FitOptions opts;
  opts.n_start = 6;
  opts.refit_n_start = 2;
  opts.seed = 9;
  opts.min_obs_per_param = 0;
  const std::size_t window = 340;
  const auto run = rolling_forecast(sim.series, spec, window, opts, 1);
  std::size_t agree = 0;
  for (std::size_t s = 0; s < run.steps.size(); ++s) {
    FitOptions cold = opts;
    cold.seed = 1234 + s;
    const auto w = std::span<const RangeObs>(sim.series).subspan(s, window);
    const auto cold_fit = fit(w, spec, cold);
    if (std::fabs(cold_fit.llf - run.steps[s].llf) < 1e-4 * (1.0 + std::fabs(cold_fit.llf)))
      ++agree;
  }
  CHECK(agree * 100 >= run.steps.size() * 95);
}

TEST_CASE("in-sample accuracy") {
  SUBCASE("perfect fit gives zero errors") {
    std::vector<RangeObs> series = {{1.0, 0.5, 0.5}, {2.0, 1.0, 1.0}, {3.0, 1.5, 1.5}};
    ModelPath path;
    path.total.lambda = {1.0, 2.0, 3.0};
    path.total.regime.assign(3, Regime::Up);
    path.total.start = 1;
    const auto [rmse, mae] = insample_accuracy(series, path);
    CHECK(rmse == 0.0);
    CHECK(mae == 0.0);
  }
  SUBCASE("a single error of magnitude e gives rmse = mae = e") {
    std::vector<RangeObs> series = {{1.0, 0.5, 0.5}, {2.5, 1.25, 1.25}};
    ModelPath path;
    path.total.lambda = {1.0, 2.0};
    path.total.regime.assign(2, Regime::Up);
    path.total.start = 1;
    const auto [rmse, mae] = insample_accuracy(series, path);
    CHECK(rmse == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mae == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("rolling forecast argument errors") {
  const auto sim = simulate_path(etacarr_config(100, 10));
  ModelSpec spec = etacarr_config(0, 0).spec;
  FitOptions opts;
  CHECK_THROWS_AS(rolling_forecast(sim.series, spec, 100, opts, 1), argument_error);
  CHECK_THROWS_AS(rolling_forecast(sim.series, spec, 90, opts, 0), argument_error);
}
