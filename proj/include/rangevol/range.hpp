#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rangevol/common.hpp"

// Range extraction and market-regime classification.
//
// A trading period's price range is measured in log-price units, split into
// an upward component (high over open) and a downward component (open over
// low). The market regime over a window of l past periods is Up when the
// upward component dominated on at least half of them, Down otherwise.
namespace rangevol {

struct PriceBar {
  std::string date;  // ordering key only; ISO YYYY-MM-DD in the CLI layer
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
};

// One period's range triple. Units are scale * natural-log differences;
// the default scale of 100 gives percent-log ranges.
struct RangeObs {
  double r = 0.0;   // total range, r == ru + rd
  double ru = 0.0;  // upward range, >= 0
  double rd = 0.0;  // downward range, >= 0
};

enum class Regime { Up, Down };

inline const char* regime_name(Regime m) { return m == Regime::Up ? "up" : "down"; }

// Window tally of upward- vs downward-dominated periods; up + down == window.
struct RegimeCounts {
  int up = 0;
  int down = 0;
  int window = 0;
};

inline void validate_bar(const PriceBar& bar, std::size_t index) {
  const auto reject = [&](const char* what) {
    throw data_error("price bar " + std::to_string(index) +
                     (bar.date.empty() ? "" : " (" + bar.date + ")") + ": " + what);
  };
  if (!(bar.open > 0.0) || !(bar.high > 0.0) || !(bar.low > 0.0) || !(bar.close > 0.0))
    reject("non-positive price");
  if (bar.high < bar.low) reject("high < low");
  if (bar.low > std::min(bar.open, bar.close)) reject("low above open/close");
  if (bar.high < std::max(bar.open, bar.close)) reject("high below open/close");
}

// Convert price bars to range observations:
//   ru = scale * (log high - log open), rd = scale * (log open - log low).
// The total r is formed as ru + rd so the decomposition identity is exact in
// the output's own arithmetic.
inline std::vector<RangeObs> extract_ranges(std::span<const PriceBar> bars,
                                            double scale = 100.0) {
  if (!(scale > 0.0)) throw argument_error("extract_ranges: scale must be > 0");
  std::vector<RangeObs> out;
  out.reserve(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    validate_bar(bars[i], i);
    RangeObs obs;
    obs.ru = scale * (std::log(bars[i].high) - std::log(bars[i].open));
    obs.rd = scale * (std::log(bars[i].open) - std::log(bars[i].low));
    obs.r = obs.ru + obs.rd;
    out.push_back(obs);
  }
  return out;
}

// Tally the window: a period counts toward Up when ru >= rd (ties are Up).
inline RegimeCounts count_regimes(std::span<const RangeObs> history) {
  RegimeCounts c;
  c.window = static_cast<int>(history.size());
  for (const auto& obs : history) {
    if (obs.ru >= obs.rd)
      ++c.up;
    else
      ++c.down;
  }
  return c;
}

// Regime over the last l observations (ordered oldest to newest). Up when the
// Up tally is at least the Down tally, including the even-window tie.
inline Regime classify_regime(std::span<const RangeObs> history, int window) {
  if (window < 1) throw argument_error("classify_regime: window must be >= 1");
  if (history.size() != static_cast<std::size_t>(window))
    throw argument_error("classify_regime: history length " + std::to_string(history.size()) +
                         " does not match window " + std::to_string(window));
  const RegimeCounts c = count_regimes(history);
  return c.up >= c.down ? Regime::Up : Regime::Down;
}

// Vectorized classification. out[t] for t >= window is the regime decided by
// observations t-window..t-1; positions before `window` are filled with Up as
// a placeholder and are not defined for model use.
inline std::vector<Regime> regime_path(std::span<const RangeObs> series, int window) {
  if (window < 1) throw argument_error("regime_path: window must be >= 1");
  if (series.size() < static_cast<std::size_t>(window))
    throw argument_error("regime_path: series shorter than window");
  std::vector<Regime> out(series.size(), Regime::Up);
  // Rolling tally instead of re-counting the window at each step.
  int up = 0;
  for (std::size_t t = 0; t < static_cast<std::size_t>(window); ++t)
    if (series[t].ru >= series[t].rd) ++up;
  for (std::size_t t = static_cast<std::size_t>(window); t < series.size(); ++t) {
    out[t] = (2 * up >= window) ? Regime::Up : Regime::Down;
    if (series[t].ru >= series[t].rd) ++up;
    if (series[t - static_cast<std::size_t>(window)].ru >=
        series[t - static_cast<std::size_t>(window)].rd)
      --up;
  }
  return out;
}

}  // namespace rangevol
