#include "rangevol/stats.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "rangevol/rng.hpp"

using namespace rangevol;

TEST_CASE("pairwise sum matches long-double accumulation") {
  Rng rng(11);
  std::vector<double> x(10000);
  for (auto& v : x) v = rng.uniform() * 2.0 - 1.0;
  long double ref = 0.0L;
  for (double v : x) ref += v;
  CHECK(pairwise_sum(x) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
}

TEST_CASE("descriptive moments on a hand-computed vector") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 10.0};
  CHECK(mean_of(x) == doctest::Approx(4.0));
  CHECK(variance_of(x) == doctest::Approx(10.0));  // population variance
  CHECK(sd_of(x) == doctest::Approx(std::sqrt(10.0)));
  // skew = m3 / sd^3 with m3 = mean((x-4)^3) = (-27 - 8 - 1 + 0 + 216)/5 = 36
  CHECK(skewness_of(x) == doctest::Approx(36.0 / std::pow(10.0, 1.5)));
}

TEST_CASE("autocorrelations match the direct formula") {
  const std::vector<double> x = {0.3, -1.2, 0.7, 2.0, -0.4, 0.9, -1.5, 0.2, 1.1, -0.6};
  const auto rho = autocorrelations(x, 3);
  const double m = mean_of(x);
  for (int k = 1; k <= 3; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) den += (x[t] - m) * (x[t] - m);
    for (std::size_t t = static_cast<std::size_t>(k); t < x.size(); ++t)
      num += (x[t] - m) * (x[t - static_cast<std::size_t>(k)] - m);
    CHECK(rho[static_cast<std::size_t>(k - 1)] == doctest::Approx(num / den).epsilon(1e-12));
  }
  CHECK_THROWS_AS(autocorrelations(x, 0), argument_error);
  CHECK_THROWS_AS(autocorrelations(x, 20), argument_error);
  const std::vector<double> constant(50, 3.0);
  CHECK_THROWS_AS(autocorrelations(constant, 2), numeric_error);
}

TEST_CASE("normal cdf reference points") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-8));
  CHECK(normal_cdf(-1.2815515655) == doctest::Approx(0.10).epsilon(1e-8));
}

TEST_CASE("chi-squared survival function reference points") {
  // dof=2 has the closed form exp(-x/2).
  for (double x : {0.5, 1.0, 3.0, 10.0})
    CHECK(chi_squared_sf(x, 2) == doctest::Approx(std::exp(-0.5 * x)).epsilon(1e-12));
  CHECK(chi_squared_sf(3.841458821, 1) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(chi_squared_sf(11.0704977, 5) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(chi_squared_sf(40.289360, 22) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(chi_squared_sf(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("kolmogorov survival function reference points") {
  // Classical critical values of the limiting Kolmogorov distribution.
  CHECK(kolmogorov_sf(1.2238) == doctest::Approx(0.10).epsilon(2e-3));
  CHECK(kolmogorov_sf(1.3581) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(kolmogorov_sf(1.6276) == doctest::Approx(0.01).epsilon(2e-2));
  CHECK(kolmogorov_sf(0.0) == doctest::Approx(1.0));
  CHECK(kolmogorov_sf(0.2) == doctest::Approx(1.0).epsilon(1e-6));
  // Continuity across the small-x/large-x series switch (slope is about 0.58
  // there, so a 2e-6 step moves the exact value by about 1.2e-6).
  CHECK(std::fabs(kolmogorov_sf(1.179999) - kolmogorov_sf(1.180001)) < 1e-5);
}

TEST_CASE("innovation-law reference cdfs") {
  CHECK(exponential_cdf(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exponential_cdf(0.0) == 0.0);
  CHECK(exponential_cdf(-1.0) == 0.0);
  // Mean-one lognormal with theta2=1: F(1) = Phi(0.5).
  CHECK(lognormal_mean_one_cdf(1.0, 1.0) == doctest::Approx(normal_cdf(0.5)).epsilon(1e-12));
  CHECK(lognormal_mean_one_cdf(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(lognormal_mean_one_cdf(1.0, 0.0), argument_error);
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(123), b(123), c(124);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    same = same && (va == vb);
    diff = diff || (va != vc);
  }
  CHECK(same);
  CHECK(diff);
  CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
  CHECK(Rng::derive(1, 0) != Rng::derive(2, 0));
}

TEST_CASE("rng variate moments") {
  Rng rng(2024);
  const int n = 200000;
  double se = 0, se2 = 0, sn = 0, sn2 = 0, sg = 0, sb = 0, sl = 0;
  for (int i = 0; i < n; ++i) {
    const double e = rng.exponential();
    se += e;
    se2 += e * e;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sg += rng.gamma(2.5);
    sb += rng.beta(2.0, 2.0);
    sl += rng.lognormal_mean_one(0.25);
  }
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  CHECK(se / n == doctest::Approx(1.0).epsilon(3 * tol));
  CHECK(se2 / n == doctest::Approx(2.0).epsilon(5 * tol));  // E[e^2] = 2
  CHECK(sn / n == doctest::Approx(0.0).scale(1.0).epsilon(2 * tol));
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(3 * tol));
  CHECK(sg / n == doctest::Approx(2.5).epsilon(3 * tol));
  CHECK(sb / n == doctest::Approx(0.5).epsilon(2 * tol));
  CHECK(sl / n == doctest::Approx(1.0).epsilon(3 * tol));
  CHECK_THROWS_AS(rng.gamma(0.0), argument_error);
  CHECK_THROWS_AS(rng.lognormal_mean_one(-1.0), argument_error);
}

TEST_CASE("uniform stays in [0, 1)") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
