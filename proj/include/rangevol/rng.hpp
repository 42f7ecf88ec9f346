#pragma once

#include <cmath>
#include <cstdint>

#include "rangevol/common.hpp"

namespace rangevol {

// Deterministic random source built on xoshiro256++ with splitmix64 seeding.
// All variate transforms are written out explicitly (no std::*_distribution)
// so that a given seed produces the same stream on every platform and
// compiler, which the reproducibility contract of the simulation and
// estimation modules relies on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  // Independent stream derivation: replication/start index -> child seed.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t x = master ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    return splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  // Exponential with unit mean.
  double exponential() { return -std::log(uniform_pos()); }

  // Standard normal via Box-Muller. The second variate of the pair is
  // discarded to keep the generator stateless between calls.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi_ * u2);
  }

  // Mean-one lognormal: LN(-theta2/2, theta2).
  double lognormal_mean_one(double theta2) {
    if (!(theta2 > 0.0)) throw argument_error("lognormal_mean_one: theta2 must be > 0");
    const double theta = std::sqrt(theta2);
    return std::exp(-0.5 * theta2 + theta * normal());
  }

  // Gamma(shape, 1) via Marsaglia-Tsang, with the boost trick for shape < 1.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw argument_error("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double beta(double a, double b) {
    const double ga = gamma(a);
    const double gb = gamma(b);
    return ga / (ga + gb);
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  static constexpr double two_pi_ = 6.283185307179586476925286766559;
  std::uint64_t state_[4];
};

}  // namespace rangevol
