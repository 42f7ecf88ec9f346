#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/range.hpp"

// Model family definitions and parameter plumbing shared by the recursion,
// likelihood and estimation layers.
//
// Families:
//   CARR    - single conditional-mean recursion on the total range.
//   ACARR   - independent recursions on the upward and downward ranges.
//   FACARR  - ACARR plus lagged opposite-direction feedback terms.
//   TARR    - two CARR branches switched by a lagged range vs a threshold.
//   TACARR  - two CARR branches switched by the up/down dominance count
//             over the last l periods, with a per-regime innovation law.
namespace rangevol {

enum class Family { Carr, Acarr, Facarr, Tarr, Tacarr };
enum class Innovation { Exponential, Lognormal };
enum class ConstraintMode {
  Stationary,     // per-branch sum(alpha) + sum(beta) < 1, plus positivity
  PositivityOnly  // positivity only
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Carr: return "carr";
    case Family::Acarr: return "acarr";
    case Family::Facarr: return "facarr";
    case Family::Tarr: return "tarr";
    case Family::Tacarr: return "tacarr";
  }
  return "?";
}

inline const char* innovation_name(Innovation i) {
  return i == Innovation::Exponential ? "exponential" : "lognormal";
}

inline const char* constraint_name(ConstraintMode c) {
  return c == ConstraintMode::Stationary ? "stationary" : "positivity";
}

inline std::optional<Family> parse_family(const std::string& s) {
  if (s == "carr") return Family::Carr;
  if (s == "acarr") return Family::Acarr;
  if (s == "facarr") return Family::Facarr;
  if (s == "tarr") return Family::Tarr;
  if (s == "tacarr") return Family::Tacarr;
  return std::nullopt;
}

// Accepts bare family names and the e/ln-prefixed shorthands (ecarr, lncarr,
// etacarr, lntacarr, ...). Bare names leave the innovation unset.
struct ParsedModelName {
  Family family;
  std::optional<Innovation> innovation;
};

inline std::optional<ParsedModelName> parse_model_name(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (auto f = parse_family(s)) return ParsedModelName{*f, std::nullopt};
  if (s.rfind("ln", 0) == 0)
    if (auto f = parse_family(s.substr(2))) return ParsedModelName{*f, Innovation::Lognormal};
  if (s.rfind("e", 0) == 0)
    if (auto f = parse_family(s.substr(1))) return ParsedModelName{*f, Innovation::Exponential};
  return std::nullopt;
}

struct ModelSpec {
  Family family = Family::Carr;
  int p = 1;  // lagged-range order
  int q = 1;  // lagged-lambda order
  int l = 1;  // regime window (TACARR) or cross-feedback lag count (FACARR)
  Innovation innovation = Innovation::Exponential;
  int delay = 1;  // TARR threshold-variable lag d
  // TARR threshold; NaN means "resolve to the in-sample mean range at fit
  // time". 0 and +inf are accepted as degenerate single-branch settings.
  double threshold = std::numeric_limits<double>::quiet_NaN();
  ConstraintMode constraints = ConstraintMode::Stationary;
};

inline int n_branches(Family f) { return f == Family::Carr ? 1 : 2; }

inline bool is_directional(Family f) { return f == Family::Acarr || f == Family::Facarr; }

// First index with a model-defined conditional mean (0-based).
inline std::size_t start_index(const ModelSpec& s) {
  int t0 = std::max(s.p, s.q);
  if (s.family == Family::Facarr || s.family == Family::Tacarr) t0 = std::max(t0, s.l);
  if (s.family == Family::Tarr) t0 = std::max(t0, s.delay);
  return static_cast<std::size_t>(t0);
}

inline void validate_spec(const ModelSpec& s) {
  if (s.p < 1 || s.q < 1) throw argument_error("model spec: orders p, q must be >= 1");
  if ((s.family == Family::Facarr || s.family == Family::Tacarr) && s.l < 1)
    throw argument_error("model spec: window l must be >= 1");
  if (s.family == Family::Tarr) {
    if (s.delay < 1) throw argument_error("model spec: delay d must be >= 1");
    if (!std::isnan(s.threshold) && s.threshold < 0.0)
      throw argument_error("model spec: threshold must be >= 0");
  }
}

// Parameters of one recursion branch. `gamma` is used by FACARR only and
// `theta2` only under lognormal innovations.
struct BranchParams {
  double omega = 0.0;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
  double theta2 = std::numeric_limits<double>::quiet_NaN();
};

struct ParamVector {
  std::vector<BranchParams> branches;
};

namespace detail {

inline bool has_gamma(const ModelSpec& s) { return s.family == Family::Facarr; }
inline bool has_theta2(const ModelSpec& s) { return s.innovation == Innovation::Lognormal; }

inline int branch_block_size(const ModelSpec& s) {
  return 1 + s.p + s.q + (has_gamma(s) ? s.l : 0) + (has_theta2(s) ? 1 : 0);
}

inline std::string branch_suffix(Family f, int b) {
  switch (f) {
    case Family::Carr: return "";
    case Family::Acarr:
    case Family::Facarr: return b == 0 ? "_u" : "_d";
    case Family::Tarr: return b == 0 ? "_r1" : "_r2";
    case Family::Tacarr: return b == 0 ? "_up" : "_down";
  }
  return "";
}

}  // namespace detail

// Total flat-parameter count (all branches, fixed or free).
inline int param_count(const ModelSpec& s) {
  return n_branches(s.family) * detail::branch_block_size(s);
}

// Flat layout, per branch: omega, alpha_1..p, beta_1..q, [gamma_1..l], [theta2].
inline std::vector<std::string> param_names(const ModelSpec& s) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(param_count(s)));
  for (int b = 0; b < n_branches(s.family); ++b) {
    const std::string sfx = detail::branch_suffix(s.family, b);
    names.push_back("omega" + sfx);
    for (int i = 1; i <= s.p; ++i) names.push_back("alpha" + std::to_string(i) + sfx);
    for (int j = 1; j <= s.q; ++j) names.push_back("beta" + std::to_string(j) + sfx);
    if (detail::has_gamma(s))
      for (int k = 1; k <= s.l; ++k) names.push_back("gamma" + std::to_string(k) + sfx);
    if (detail::has_theta2(s)) names.push_back("theta2" + sfx);
  }
  return names;
}

inline std::vector<double> flatten(const ModelSpec& s, const ParamVector& p) {
  if (static_cast<int>(p.branches.size()) != n_branches(s.family))
    throw argument_error("flatten: branch count does not match the model family");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(param_count(s)));
  for (const auto& b : p.branches) {
    if (static_cast<int>(b.alpha.size()) != s.p || static_cast<int>(b.beta.size()) != s.q)
      throw argument_error("flatten: alpha/beta lengths do not match orders");
    if (detail::has_gamma(s) && static_cast<int>(b.gamma.size()) != s.l)
      throw argument_error("flatten: gamma length does not match l");
    out.push_back(b.omega);
    out.insert(out.end(), b.alpha.begin(), b.alpha.end());
    out.insert(out.end(), b.beta.begin(), b.beta.end());
    if (detail::has_gamma(s)) out.insert(out.end(), b.gamma.begin(), b.gamma.end());
    if (detail::has_theta2(s)) out.push_back(b.theta2);
  }
  return out;
}

inline ParamVector unflatten(const ModelSpec& s, std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != param_count(s))
    throw argument_error("unflatten: expected " + std::to_string(param_count(s)) +
                         " parameters, got " + std::to_string(flat.size()));
  ParamVector out;
  std::size_t k = 0;
  for (int b = 0; b < n_branches(s.family); ++b) {
    BranchParams bp;
    bp.omega = flat[k++];
    bp.alpha.assign(flat.begin() + k, flat.begin() + k + s.p);
    k += static_cast<std::size_t>(s.p);
    bp.beta.assign(flat.begin() + k, flat.begin() + k + s.q);
    k += static_cast<std::size_t>(s.q);
    if (detail::has_gamma(s)) {
      bp.gamma.assign(flat.begin() + k, flat.begin() + k + s.l);
      k += static_cast<std::size_t>(s.l);
    }
    if (detail::has_theta2(s)) bp.theta2 = flat[k++];
    out.branches.push_back(std::move(bp));
  }
  return out;
}

// Feasible-set constants shared by validation, projection and estimation.
inline constexpr double kOmegaMin = 1e-10;
inline constexpr double kTheta2Min = 1e-8;
inline constexpr double kStationarySlack = 1e-6;  // sum(alpha)+sum(beta) <= 1 - slack

inline void validate_params(const ModelSpec& s, const ParamVector& p) {
  if (static_cast<int>(p.branches.size()) != n_branches(s.family))
    throw argument_error("params: branch count does not match the model family");
  for (const auto& b : p.branches) {
    if (!std::isfinite(b.omega) || !(b.omega > 0.0))
      throw argument_error("params: omega must be > 0");
    double coef_sum = 0.0;
    for (double a : b.alpha) {
      if (!std::isfinite(a) || a < 0.0) throw argument_error("params: alpha must be >= 0");
      coef_sum += a;
    }
    for (double v : b.beta) {
      if (!std::isfinite(v) || v < 0.0) throw argument_error("params: beta must be >= 0");
      coef_sum += v;
    }
    for (double g : b.gamma)
      if (!std::isfinite(g) || g < 0.0) throw argument_error("params: gamma must be >= 0");
    if (s.constraints == ConstraintMode::Stationary && !(coef_sum < 1.0))
      throw argument_error("params: sum(alpha) + sum(beta) must be < 1 per branch");
    if (detail::has_theta2(s) && (!std::isfinite(b.theta2) || !(b.theta2 > 0.0)))
      throw argument_error("params: theta2 must be > 0");
  }
}

// Retraction onto the feasible set: clamp to the lower bounds, then rescale
// each branch's (alpha, beta) block when the stationarity cap binds. Returns
// the squared distance moved, which the estimator uses as a penalty weight.
inline double project_feasible(const ModelSpec& s, std::span<double> flat) {
  const std::vector<double> before(flat.begin(), flat.end());
  std::size_t k = 0;
  for (int b = 0; b < n_branches(s.family); ++b) {
    double& omega = flat[k++];
    if (!(omega >= kOmegaMin)) omega = kOmegaMin;
    const std::size_t coef_begin = k;
    const std::size_t coef_count = static_cast<std::size_t>(s.p + s.q);
    double coef_sum = 0.0;
    for (std::size_t i = 0; i < coef_count; ++i, ++k) {
      if (!(flat[k] >= 0.0)) flat[k] = 0.0;
      coef_sum += flat[k];
    }
    if (s.constraints == ConstraintMode::Stationary && coef_sum > 1.0 - kStationarySlack) {
      const double scale = (1.0 - kStationarySlack) / coef_sum;
      for (std::size_t i = 0; i < coef_count; ++i) flat[coef_begin + i] *= scale;
    }
    if (detail::has_gamma(s))
      for (int g = 0; g < s.l; ++g, ++k)
        if (!(flat[k] >= 0.0)) flat[k] = 0.0;
    if (detail::has_theta2(s)) {
      if (!(flat[k] >= kTheta2Min)) flat[k] = kTheta2Min;
      ++k;
    }
  }
  double dist2 = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double d = flat[i] - before[i];
    dist2 += d * d;
  }
  return dist2;
}

}  // namespace rangevol
