#include "rangevol/simulate.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rangevol/stats.hpp"

using namespace rangevol;

namespace {

SimConfig iid_exponential_config(std::size_t length, std::uint64_t seed) {
  SimConfig cfg;
  cfg.spec.family = Family::Carr;
  cfg.spec.innovation = Innovation::Exponential;
  cfg.params.branches.resize(1);
  cfg.params.branches[0] = {1.0, {0.0}, {0.0}, {}, 0.0};
  cfg.length = length;
  cfg.seed = seed;
  return cfg;
}

SimConfig etacarr_config(std::size_t length, std::uint64_t seed) {
  SimConfig cfg;
  cfg.spec.family = Family::Tacarr;
  cfg.spec.innovation = Innovation::Exponential;
  cfg.params.branches.resize(2);
  cfg.params.branches[0] = {0.01, {0.1}, {0.8}, {}, 0.0};
  cfg.params.branches[1] = {0.10, {0.2}, {0.7}, {}, 0.0};
  cfg.length = length;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> totals(const std::vector<RangeObs>& series) {
  std::vector<double> r(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) r[i] = series[i].r;
  return r;
}

}  // namespace

TEST_CASE("zero-coefficient exponential DGP reduces to i.i.d. exp(1)") {
  const auto cfg = iid_exponential_config(20000, 1);
  const auto sim = simulate_path(cfg);
  const auto r = totals(sim.series);
  const double tol = 3.0 / std::sqrt(static_cast<double>(r.size()));
  CHECK(mean_of(r) == doctest::Approx(1.0).epsilon(tol));
  CHECK(sd_of(r) == doctest::Approx(1.0).epsilon(2.0 * tol));
  for (double lam : sim.lambda) CHECK(lam == 1.0);
}

TEST_CASE("lognormal innovation moments on a degenerate DGP") {
  SimConfig cfg = iid_exponential_config(20000, 2);
  cfg.spec.innovation = Innovation::Lognormal;
  cfg.params.branches[0].theta2 = 0.25;
  const auto sim = simulate_path(cfg);
  const auto r = totals(sim.series);
  std::vector<double> log_r(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) log_r[i] = std::log(r[i]);
  const double tol = 3.0 / std::sqrt(static_cast<double>(r.size()));
  CHECK(mean_of(r) == doctest::Approx(1.0).epsilon(2.0 * tol));
  CHECK(variance_of(log_r) == doctest::Approx(0.25).epsilon(5.0 * tol));
}

TEST_CASE("same seed reproduces the path bitwise; different seeds differ") {
  const auto a = simulate_path(etacarr_config(500, 7));
  const auto b = simulate_path(etacarr_config(500, 7));
  const auto c = simulate_path(etacarr_config(500, 8));
  REQUIRE(a.series.size() == b.series.size());
  bool same = true, diff = false;
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    same = same && a.series[i].r == b.series[i].r && a.lambda[i] == b.lambda[i];
    diff = diff || a.series[i].r != c.series[i].r;
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("generated paths satisfy the decomposition identity exactly") {
  const auto sim = simulate_path(etacarr_config(2000, 9));
  for (const auto& o : sim.series) {
    CHECK(o.r == o.ru + o.rd);
    CHECK(o.ru >= 0.0);
    CHECK(o.rd >= 0.0);
  }
}

TEST_CASE("replaying the recursion over the full series reproduces the generator lambdas") {
  const auto cfg = etacarr_config(1000, 10);
  const auto sim = simulate_path(cfg);
  LambdaInit init;
  init.fixed = sim.lambda_init;
  const auto replay = lambda_total_path(sim.full_series, cfg.params, cfg.spec, init);
  double worst = 0.0;
  for (std::size_t i = 0; i < sim.series.size(); ++i)
    worst = std::max(worst, std::fabs(replay.lambda[sim.burn_in + i] - sim.lambda[i]));
  CHECK(worst < 1e-10);
  // Regime labels replay identically as well.
  for (std::size_t i = 0; i < sim.series.size(); ++i)
    CHECK(replay.regime[sim.burn_in + i] == sim.regime[i]);
}

TEST_CASE("uniform split yields about half Up days at l=1") {
  const auto sim = simulate_path(etacarr_config(20000, 11));
  std::size_t up = 0;
  for (const Regime m : sim.regime)
    if (m == Regime::Up) ++up;
  const double freq = static_cast<double>(up) / static_cast<double>(sim.regime.size());
  CHECK(std::fabs(freq - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(sim.regime.size())));
}

TEST_CASE("beta split changes the regime driver but keeps the identity") {
  SimConfig cfg = etacarr_config(4000, 12);
  cfg.split.kind = SplitKind::Beta;
  cfg.split.beta_a = 2.0;
  cfg.split.beta_b = 2.0;
  const auto sim = simulate_path(cfg);
  for (const auto& o : sim.series) CHECK(o.r == o.ru + o.rd);
  std::size_t up = 0;
  for (const Regime m : sim.regime)
    if (m == Regime::Up) ++up;
  const double freq = static_cast<double>(up) / static_cast<double>(sim.regime.size());
  CHECK(std::fabs(freq - 0.5) < 0.05);  // symmetric split keeps the balance
}

TEST_CASE("TARR generation follows the threshold rule") {
  SimConfig cfg;
  cfg.spec.family = Family::Tarr;
  cfg.spec.innovation = Innovation::Exponential;
  cfg.spec.threshold = 0.9;
  cfg.params.branches.resize(2);
  cfg.params.branches[0] = {0.3, {0.2}, {0.3}, {}, 0.0};
  cfg.params.branches[1] = {0.9, {0.1}, {0.2}, {}, 0.0};
  cfg.length = 500;
  cfg.seed = 13;
  const auto sim = simulate_path(cfg);
  for (std::size_t t = 1; t < sim.series.size(); ++t) {
    const Regime want = sim.series[t - 1].r >= 0.9 ? Regime::Up : Regime::Down;
    CHECK(sim.regime[t] == want);
  }
}

TEST_CASE("explosive positivity-only parameter sets overflow with a numeric error") {
  SimConfig cfg;
  cfg.spec.family = Family::Carr;
  cfg.spec.innovation = Innovation::Exponential;
  cfg.spec.constraints = ConstraintMode::PositivityOnly;
  cfg.params.branches.resize(1);
  cfg.params.branches[0] = {1.0, {0.8}, {0.9}, {}, 0.0};  // alpha + beta > 1
  cfg.length = 5000;
  cfg.burn_in = 0;
  cfg.seed = 14;
  CHECK_THROWS_AS(simulate_path(cfg), numeric_error);
}

TEST_CASE("directional DGPs are rejected") {
  SimConfig cfg;
  cfg.spec.family = Family::Acarr;
  cfg.params.branches.resize(2);
  cfg.params.branches[0] = {0.1, {0.1}, {0.5}, {}, 0.0};
  cfg.params.branches[1] = {0.1, {0.1}, {0.5}, {}, 0.0};
  CHECK_THROWS_AS(simulate_path(cfg), argument_error);
}

TEST_CASE("single-replication recovery: MADE equals the absolute deviation") {
  SimConfig cfg = etacarr_config(400, 15);
  cfg.n_reps = 1;
  FitOptions opts;
  opts.n_start = 3;
  opts.min_obs_per_param = 0;
  const auto report = recovery_study(cfg, opts, 1);
  REQUIRE(report.n_reps == 1);
  if (report.n_converged == 1)
    for (std::size_t i = 0; i < report.made.size(); ++i)
      CHECK(report.made[i] ==
            doctest::Approx(std::fabs(report.mean_estimate[i] - report.truth[i])).epsilon(1e-12));
}

TEST_CASE("recovery study is deterministic and respects the convergence filter") {
  SimConfig cfg = etacarr_config(400, 16);
  cfg.n_reps = 4;
  FitOptions opts;
  opts.n_start = 3;
  opts.min_obs_per_param = 0;
  const auto a = recovery_study(cfg, opts, 1);
  const auto b = recovery_study(cfg, opts, 2);  // different worker count, same result
  CHECK(a.mean_estimate == b.mean_estimate);
  CHECK(a.made == b.made);
  CHECK(a.n_converged == b.n_converged);

  // Aggregation excludes non-converged rows and reports the rate.
  std::vector<ReplicationRow> rows(2);
  rows[0] = {0, true, true, -10.0, std::vector<double>(6, 0.5)};
  rows[1] = {1, false, true, -99.0, std::vector<double>(6, 9.0)};
  const auto agg = aggregate_recovery(cfg, rows);
  CHECK(agg.n_converged == 1);
  CHECK(agg.convergence_rate == doctest::Approx(0.5));
  for (const double m : agg.mean_estimate) CHECK(m == doctest::Approx(0.5));
}

TEST_CASE("every replication's optimum dominates the likelihood at the truth") {
  SimConfig cfg = etacarr_config(800, 19);
  FitOptions opts;
  opts.n_start = 4;
  for (std::size_t rep = 0; rep < 8; ++rep) {
    const auto row = run_replication(cfg, rep, opts);
    CHECK(row.beat_truth);
  }
}

TEST_CASE("mean deviation never exceeds MADE") {
  SimConfig cfg = etacarr_config(600, 17);
  cfg.n_reps = 6;
  FitOptions opts;
  opts.n_start = 3;
  const auto report = recovery_study(cfg, opts, 1);
  for (std::size_t i = 0; i < report.made.size(); ++i)
    CHECK(std::fabs(report.mean_estimate[i] - report.truth[i]) <= report.made[i] + 1e-12);
}
