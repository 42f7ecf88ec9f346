#include "rangevol/recursion.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rangevol/rng.hpp"
#include "rangevol/simulate.hpp"

using namespace rangevol;

namespace {

std::vector<RangeObs> random_series(Rng& rng, std::size_t n) {
  std::vector<RangeObs> out(n);
  for (auto& o : out) {
    const double r = rng.exponential() + 0.05;
    const double u = rng.uniform();
    o.ru = u * r;
    o.rd = r - o.ru;
    o.r = o.ru + o.rd;
  }
  return out;
}

ParamVector two_branch(double o1, double a1, double b1, double o2, double a2, double b2) {
  ParamVector p;
  p.branches.resize(2);
  p.branches[0].omega = o1;
  p.branches[0].alpha = {a1};
  p.branches[0].beta = {b1};
  p.branches[1].omega = o2;
  p.branches[1].alpha = {a2};
  p.branches[1].beta = {b2};
  return p;
}

ParamVector one_branch(double o, double a, double b) {
  ParamVector p;
  p.branches.resize(1);
  p.branches[0].omega = o;
  p.branches[0].alpha = {a};
  p.branches[0].beta = {b};
  return p;
}

}  // namespace

TEST_CASE("degenerate TACARR recursion returns the branch constants") {
  std::vector<RangeObs> series;
  for (int i = 0; i < 30; ++i)
    series.push_back(i % 2 == 0 ? RangeObs{1.0, 0.9, 0.1} : RangeObs{1.0, 0.1, 0.9});
  ModelSpec spec;
  spec.family = Family::Tacarr;
  const auto params = two_branch(0.3, 0.0, 0.0, 0.7, 0.0, 0.0);
  const auto path = lambda_total_path(series, params, spec);
  for (std::size_t t = path.start; t < series.size(); ++t) {
    const bool up = series[t - 1].ru >= series[t - 1].rd;
    CHECK(path.lambda[t] == (up ? 0.3 : 0.7));
    CHECK(path.regime[t] == (up ? Regime::Up : Regime::Down));
  }
}

TEST_CASE("CARR with zero coefficients is constant at omega") {
  Rng rng(4);
  const auto series = random_series(rng, 40);
  ModelSpec spec;  // CARR(1,1)
  const auto path = lambda_total_path(series, one_branch(0.42, 0.0, 0.0), spec);
  for (std::size_t t = path.start; t < series.size(); ++t) CHECK(path.lambda[t] == 0.42);
}

TEST_CASE("CARR fixed point under constant input") {
  // lambda <- 0.1 + 0.2 * 1 + 0.7 * lambda converges to 1.
  std::vector<RangeObs> series(400, RangeObs{1.0, 0.6, 0.4});
  ModelSpec spec;
  const auto path = lambda_total_path(series, one_branch(0.1, 0.2, 0.7), spec);
  CHECK(path.lambda.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("TACARR Up-branch fixed point under constant all-Up input") {
  // Fitted-model coefficients; with R == 1 and every day Up, iterating
  // lambda <- omega + alpha + beta * lambda converges to (omega+alpha)/(1-beta).
  // The published Down branch sits exactly on the unit-persistence boundary
  // (0.2291 + 0.7709 = 1), so this needs the positivity-only constraint mode.
  std::vector<RangeObs> series(600, RangeObs{1.0, 0.7, 0.3});
  ModelSpec spec;
  spec.family = Family::Tacarr;
  spec.constraints = ConstraintMode::PositivityOnly;
  const auto params = two_branch(0.0798, 0.1573, 0.7777, 0.0248, 0.2291, 0.7709);
  const auto path = lambda_total_path(series, params, spec);
  double iterated = 1.0;  // independent oracle: iterate to convergence
  for (int i = 0; i < 4000; ++i) iterated = 0.0798 + 0.1573 * 1.0 + 0.7777 * iterated;
  CHECK(iterated == doctest::Approx((0.0798 + 0.1573) / (1.0 - 0.7777)).epsilon(1e-12));
  CHECK(path.lambda.back() == doctest::Approx(iterated).epsilon(1e-10));
}

TEST_CASE("ten-point hand-unrolled oracle per family") {
  Rng rng(2718);
  const auto series = random_series(rng, 10);
  const double mean_r = [&] {
    double s = 0;
    for (const auto& o : series) s += o.r;
    return s / series.size();
  }();

  SUBCASE("carr") {
    ModelSpec spec;
    const auto params = one_branch(0.05, 0.25, 0.55);
    const auto path = lambda_total_path(series, params, spec);
    double lam_prev = mean_r;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double want = 0.05 + 0.25 * series[t - 1].r + 0.55 * lam_prev;
      CHECK(path.lambda[t] == doctest::Approx(want).epsilon(1e-12));
      lam_prev = want;
    }
  }

  SUBCASE("tacarr") {
    ModelSpec spec;
    spec.family = Family::Tacarr;
    const auto params = two_branch(0.05, 0.25, 0.55, 0.1, 0.1, 0.6);
    const auto path = lambda_total_path(series, params, spec);
    double lam_prev = mean_r;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const bool up = series[t - 1].ru >= series[t - 1].rd;
      const double want = up ? 0.05 + 0.25 * series[t - 1].r + 0.55 * lam_prev
                             : 0.1 + 0.1 * series[t - 1].r + 0.6 * lam_prev;
      CHECK(path.lambda[t] == doctest::Approx(want).epsilon(1e-12));
      lam_prev = want;
    }
  }

  SUBCASE("tarr with sample-mean threshold") {
    ModelSpec spec;
    spec.family = Family::Tarr;
    spec.threshold = mean_r;
    const auto params = two_branch(0.05, 0.25, 0.55, 0.1, 0.1, 0.6);
    const auto path = lambda_total_path(series, params, spec);
    double lam_prev = mean_r;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const bool high = series[t - 1].r >= mean_r;
      const double want = high ? 0.05 + 0.25 * series[t - 1].r + 0.55 * lam_prev
                               : 0.1 + 0.1 * series[t - 1].r + 0.6 * lam_prev;
      CHECK(path.lambda[t] == doctest::Approx(want).epsilon(1e-12));
      CHECK(path.regime[t] == (high ? Regime::Up : Regime::Down));
      lam_prev = want;
    }
  }

  SUBCASE("acarr") {
    ModelSpec spec;
    spec.family = Family::Acarr;
    const auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
    const auto [up, down] = lambda_directional_paths(series, params, spec);
    double mu = 0, md = 0;
    for (const auto& o : series) {
      mu += o.ru;
      md += o.rd;
    }
    mu /= series.size();
    md /= series.size();
    double lu = mu, ld = md;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double wu = 0.04 + 0.2 * series[t - 1].ru + 0.5 * lu;
      const double wd = 0.07 + 0.15 * series[t - 1].rd + 0.6 * ld;
      CHECK(up.lambda[t] == doctest::Approx(wu).epsilon(1e-12));
      CHECK(down.lambda[t] == doctest::Approx(wd).epsilon(1e-12));
      lu = wu;
      ld = wd;
    }
  }

  SUBCASE("facarr") {
    ModelSpec spec;
    spec.family = Family::Facarr;
    auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
    params.branches[0].gamma = {0.1};
    params.branches[1].gamma = {0.08};
    const auto [up, down] = lambda_directional_paths(series, params, spec);
    double mu = 0, md = 0;
    for (const auto& o : series) {
      mu += o.ru;
      md += o.rd;
    }
    mu /= series.size();
    md /= series.size();
    double lu = mu, ld = md;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double wu = 0.04 + 0.2 * series[t - 1].ru + 0.5 * lu + 0.1 * series[t - 1].rd;
      const double wd = 0.07 + 0.15 * series[t - 1].rd + 0.6 * ld + 0.08 * series[t - 1].ru;
      CHECK(up.lambda[t] == doctest::Approx(wu).epsilon(1e-12));
      CHECK(down.lambda[t] == doctest::Approx(wd).epsilon(1e-12));
      lu = wu;
      ld = wd;
    }
  }
}

TEST_CASE("nesting identities") {
  Rng rng(5);
  const auto series = random_series(rng, 200);

  SUBCASE("TACARR with identical branches equals CARR") {
    ModelSpec carr;
    ModelSpec tacarr;
    tacarr.family = Family::Tacarr;
    const auto shared = one_branch(0.08, 0.22, 0.6);
    const auto both = two_branch(0.08, 0.22, 0.6, 0.08, 0.22, 0.6);
    const auto a = lambda_total_path(series, shared, carr);
    const auto b = lambda_total_path(series, both, tacarr);
    for (std::size_t t = b.start; t < series.size(); ++t)
      CHECK(a.lambda[t] == doctest::Approx(b.lambda[t]).epsilon(1e-12));
  }

  SUBCASE("FACARR with zero gamma equals ACARR") {
    ModelSpec acarr;
    acarr.family = Family::Acarr;
    ModelSpec facarr;
    facarr.family = Family::Facarr;
    const auto base = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
    auto with_gamma = base;
    with_gamma.branches[0].gamma = {0.0};
    with_gamma.branches[1].gamma = {0.0};
    const auto [au, ad] = lambda_directional_paths(series, base, acarr);
    const auto [fu, fd] = lambda_directional_paths(series, with_gamma, facarr);
    for (std::size_t t = fu.start; t < series.size(); ++t) {
      CHECK(au.lambda[t] == doctest::Approx(fu.lambda[t]).epsilon(1e-12));
      CHECK(ad.lambda[t] == doctest::Approx(fd.lambda[t]).epsilon(1e-12));
    }
  }

  SUBCASE("degenerate TARR thresholds reproduce single-branch CARR") {
    ModelSpec carr;
    const auto params = two_branch(0.05, 0.25, 0.55, 0.1, 0.1, 0.6);
    ModelSpec always_r1;
    always_r1.family = Family::Tarr;
    always_r1.threshold = 0.0;
    const auto a = lambda_total_path(series, params, always_r1);
    const auto c1 = lambda_total_path(series, one_branch(0.05, 0.25, 0.55), carr);
    ModelSpec always_r2;
    always_r2.family = Family::Tarr;
    always_r2.threshold = std::numeric_limits<double>::infinity();
    const auto b = lambda_total_path(series, params, always_r2);
    const auto c2 = lambda_total_path(series, one_branch(0.1, 0.1, 0.6), carr);
    for (std::size_t t = 1; t < series.size(); ++t) {
      CHECK(a.lambda[t] == doctest::Approx(c1.lambda[t]).epsilon(1e-12));
      CHECK(b.lambda[t] == doctest::Approx(c2.lambda[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("recursion homogeneity: scaling omega and ranges scales lambda") {
  Rng rng(6);
  const auto series = random_series(rng, 80);
  const double c = 3.25;
  auto scaled = series;
  for (auto& o : scaled) {
    o.r *= c;
    o.ru *= c;
    o.rd *= c;
  }
  ModelSpec spec;
  spec.family = Family::Tacarr;
  auto params = two_branch(0.05, 0.25, 0.55, 0.1, 0.1, 0.6);
  auto params_scaled = params;
  params_scaled.branches[0].omega *= c;
  params_scaled.branches[1].omega *= c;
  const auto a = lambda_total_path(series, params, spec);
  const auto b = lambda_total_path(scaled, params_scaled, spec);
  for (std::size_t t = a.start; t < series.size(); ++t)
    CHECK(b.lambda[t] == doctest::Approx(c * a.lambda[t]).epsilon(1e-12));
}

TEST_CASE("lambda stays positive for feasible parameters") {
  Rng rng(8);
  const auto series = random_series(rng, 150);
  ModelSpec spec;
  spec.family = Family::Tacarr;
  spec.p = 2;
  spec.q = 1;
  spec.l = 3;
  for (int rep = 0; rep < 20; ++rep) {
    ParamVector p;
    p.branches.resize(2);
    for (auto& b : p.branches) {
      b.omega = 0.01 + rng.uniform() * 0.2;
      b.alpha = {rng.uniform() * 0.2, rng.uniform() * 0.2};
      b.beta = {rng.uniform() * 0.5};
    }
    const auto path = lambda_total_path(series, p, spec);
    for (std::size_t t = path.start; t < series.size(); ++t) CHECK(path.lambda[t] > 0.0);
  }
}

TEST_CASE("ACARR components are independent of the opposite series") {
  Rng rng(9);
  const auto series = random_series(rng, 60);
  auto perturbed = series;
  for (auto& o : perturbed) {
    o.rd += 0.5;  // only the downward component moves
    o.r = o.ru + o.rd;
  }
  ModelSpec spec;
  spec.family = Family::Acarr;
  const auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
  const auto [u1, d1] = lambda_directional_paths(series, params, spec);
  const auto [u2, d2] = lambda_directional_paths(perturbed, params, spec);
  for (std::size_t t = u1.start; t < series.size(); ++t)
    CHECK(u1.lambda[t] == u2.lambda[t]);
}

TEST_CASE("FACARR first-impact response to a shifted opposite history") {
  Rng rng(10);
  const auto series = random_series(rng, 40);
  auto shifted = series;
  // Shift the downward history by +1 from some index onward; the upward path
  // must move by exactly gamma * 1 at the first affected step.
  const std::size_t t_shift = 20;
  for (std::size_t t = t_shift; t < shifted.size(); ++t) {
    shifted[t].rd += 1.0;
    shifted[t].r = shifted[t].ru + shifted[t].rd;
  }
  ModelSpec spec;
  spec.family = Family::Facarr;
  auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
  params.branches[0].gamma = {0.1};
  params.branches[1].gamma = {0.0};
  LambdaInit init;
  init.fixed = 0.5;  // identical initialization isolates the gamma effect
  const auto [u1, d1] = lambda_directional_paths(series, params, spec, init);
  const auto [u2, d2] = lambda_directional_paths(shifted, params, spec, init);
  CHECK(u2.lambda[t_shift + 1] - u1.lambda[t_shift + 1] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("explicit lambda initialization is honored") {
  Rng rng(12);
  const auto series = random_series(rng, 20);
  ModelSpec spec;
  LambdaInit init;
  init.fixed = 2.5;
  const auto path = lambda_total_path(series, one_branch(0.1, 0.2, 0.6), spec, init);
  CHECK(path.lambda[0] == 2.5);
  LambdaInit bad;
  bad.fixed = -1.0;
  CHECK_THROWS_AS(lambda_total_path(series, one_branch(0.1, 0.2, 0.6), spec, bad),
                  argument_error);
}

TEST_CASE("recursion argument and numeric errors") {
  Rng rng(13);
  auto series = random_series(rng, 20);
  ModelSpec spec;
  spec.family = Family::Tacarr;
  spec.l = 25;
  const auto params = two_branch(0.1, 0.2, 0.6, 0.1, 0.2, 0.6);
  CHECK_THROWS_AS(lambda_total_path(series, params, spec), argument_error);
  spec.l = 1;
  auto bad_params = params;
  bad_params.branches[0].omega = -0.5;
  CHECK_THROWS_AS(lambda_total_path(series, bad_params, spec), argument_error);
  series[4].r = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lambda_total_path(series, params, spec), numeric_error);
}

TEST_CASE("arma rearrangement identity vanishes on recursion paths") {
  Rng rng(14);

  SUBCASE("tacarr(1,1,1)") {
    const auto series = random_series(rng, 120);
    ModelSpec spec;
    spec.family = Family::Tacarr;
    const auto params = two_branch(0.05, 0.25, 0.55, 0.1, 0.1, 0.6);
    const auto path = lambda_total_path(series, params, spec);
    CHECK(arma_residual_check(series, path, params, spec) < 1e-10);
  }

  SUBCASE("zero padding beyond the declared order") {
    const auto series = random_series(rng, 120);
    for (auto [p, q] : {std::pair{2, 1}, std::pair{1, 2}}) {
      ModelSpec spec;
      spec.family = Family::Tacarr;
      spec.p = p;
      spec.q = q;
      ParamVector params;
      params.branches.resize(2);
      for (auto& b : params.branches) {
        b.omega = 0.05;
        b.alpha.assign(static_cast<std::size_t>(p), 0.1);
        b.beta.assign(static_cast<std::size_t>(q), 0.3);
      }
      const auto path = lambda_total_path(series, params, spec);
      CHECK(arma_residual_check(series, path, params, spec) < 1e-10);
    }
  }

  SUBCASE("simulated path") {
    ModelSpec spec;
    spec.family = Family::Tacarr;
    spec.innovation = Innovation::Exponential;
    SimConfig cfg;
    cfg.spec = spec;
    ParamVector truth = two_branch(0.01, 0.1, 0.8, 0.1, 0.2, 0.7);
    cfg.params = truth;
    cfg.length = 50;
    cfg.burn_in = 100;
    cfg.seed = 3;
    const auto sim = simulate_path(cfg);
    const auto path = lambda_total_path(sim.series, truth, spec);
    CHECK(arma_residual_check(sim.series, path, truth, spec) < 1e-10);
  }

  SUBCASE("directional families are rejected") {
    const auto series = random_series(rng, 30);
    ModelSpec spec;
    spec.family = Family::Acarr;
    const auto params = two_branch(0.04, 0.2, 0.5, 0.07, 0.15, 0.6);
    const auto path = eval_lambda(series, params, spec);
    CHECK_THROWS_AS(arma_residual_check(series, path.total, params, spec), argument_error);
  }
}
