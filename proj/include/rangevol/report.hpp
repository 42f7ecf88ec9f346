#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rangevol/csv.hpp"
#include "rangevol/diagnostics.hpp"
#include "rangevol/estimate.hpp"
#include "rangevol/forecast.hpp"
#include "rangevol/simulate.hpp"

// Report emission: JSON for machines, aligned text for humans, CSV for
// series, and a small SVG renderer for plots. All output is deterministic
// for a given input and seed (no timestamps, sorted JSON keys, fixed float
// formats).
namespace rangevol {

using json = nlohmann::json;

// Display label, e.g. "LNTACARR(1,1,1)" or "EACARR(1,1)".
inline std::string model_label(const ModelSpec& spec) {
  std::string name = spec.innovation == Innovation::Lognormal ? "LN" : "E";
  std::string fam = family_name(spec.family);
  std::transform(fam.begin(), fam.end(), fam.begin(), [](unsigned char c) { return std::toupper(c); });
  name += fam;
  if (spec.family == Family::Tacarr || spec.family == Family::Facarr)
    name += "(" + std::to_string(spec.l) + "," + std::to_string(spec.p) + "," +
            std::to_string(spec.q) + ")";
  else
    name += "(" + std::to_string(spec.p) + "," + std::to_string(spec.q) + ")";
  return name;
}

inline json spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  j["innovation"] = innovation_name(spec.innovation);
  j["p"] = spec.p;
  j["q"] = spec.q;
  j["l"] = spec.l;
  j["constraints"] = constraint_name(spec.constraints);
  j["label"] = model_label(spec);
  if (spec.family == Family::Tarr) {
    j["delay"] = spec.delay;
    if (!std::isnan(spec.threshold)) j["threshold"] = spec.threshold;
  }
  return j;
}

inline json test_to_json(const TestReport& t) {
  json j;
  j["test"] = t.test;
  j["statistic"] = t.statistic;
  j["p_value"] = t.p_value;
  j["n"] = t.n;
  if (t.lags > 0) j["lags"] = t.lags;
  if (!t.detail.empty()) j["detail"] = t.detail;
  return j;
}

inline json fit_to_json(const FitResult& fit, std::span<const TestReport> diagnostics,
                        std::pair<double, double> insample, std::uint64_t seed) {
  json j;
  j["model"] = spec_to_json(fit.spec);
  json estimates = json::array();
  for (std::size_t i = 0; i < fit.flat.size(); ++i) {
    json e;
    e["name"] = fit.names[i];
    e["value"] = fit.flat[i];
    if (fit.se_available && std::isfinite(fit.std_errors[i]))
      e["std_error"] = fit.std_errors[i];
    else
      e["std_error"] = nullptr;
    estimates.push_back(e);
  }
  j["estimates"] = estimates;
  j["llf"] = fit.llf;
  j["aic"] = fit.aic;
  j["bic"] = fit.bic;
  j["n_eff"] = fit.n_eff;
  j["k"] = fit.k;
  j["converged"] = fit.converged;
  j["best_start"] = fit.best_start;
  j["evaluations"] = fit.evaluations;
  if (!fit.se_note.empty()) j["se_note"] = fit.se_note;
  std::size_t up = 0;
  for (const Regime m : fit.residuals.regime)
    if (m == Regime::Up) ++up;
  j["regime_counts"] = {{"up", up}, {"down", fit.residuals.regime.size() - up}};
  j["insample"] = {{"rmse", insample.first}, {"mae", insample.second}};
  json diag = json::array();
  for (const auto& t : diagnostics) diag.push_back(test_to_json(t));
  j["diagnostics"] = diag;
  j["seed"] = seed;
  return j;
}

namespace detail {

inline std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline std::string fit_to_text(const FitResult& fit, std::span<const TestReport> diagnostics,
                               std::pair<double, double> insample) {
  std::string out;
  out += "Model: " + model_label(fit.spec) + "\n";
  out += "Constraints: " + std::string(constraint_name(fit.spec.constraints)) + "\n";
  if (fit.spec.family == Family::Tarr)
    out += "Threshold: " + detail::fixed6(fit.spec.threshold) +
           " (delay " + std::to_string(fit.spec.delay) + ")\n";
  out += "Converged: " + std::string(fit.converged ? "yes" : "no") +
         "   n_eff: " + std::to_string(fit.n_eff) + "   k: " + std::to_string(fit.k) + "\n\n";
  out += detail::pad("parameter", 14) + detail::pad("estimate", 14) + "std error\n";
  for (std::size_t i = 0; i < fit.flat.size(); ++i) {
    const bool have_se = fit.se_available && std::isfinite(fit.std_errors[i]);
    out += detail::pad(fit.names[i], 14) + detail::pad(detail::fixed6(fit.flat[i]), 14) +
           (have_se ? detail::fixed6(fit.std_errors[i]) : std::string("n/a")) + "\n";
  }
  if (!fit.se_note.empty()) out += "note: " + fit.se_note + "\n";
  out += "\nLLF: " + detail::fixed6(fit.llf) + "\nAIC: " + detail::fixed6(fit.aic) +
         "\nBIC: " + detail::fixed6(fit.bic) + "\n";
  out += "In-sample RMSE: " + detail::fixed6(insample.first) +
         "   MAE: " + detail::fixed6(insample.second) + "\n";
  if (!diagnostics.empty()) {
    out += "\n" + detail::pad("test", 14) + detail::pad("statistic", 14) + "p-value\n";
    for (const auto& t : diagnostics) {
      const std::string name = t.test == "ljung_box" ? "Q(" + std::to_string(t.lags) + ")" : t.test;
      out += detail::pad(name, 14) + detail::pad(detail::fixed6(t.statistic), 14) +
             detail::fixed6(t.p_value) + "\n";
    }
  }
  return out;
}

inline json recovery_to_json(const RecoveryReport& rep) {
  json j;
  j["model"] = spec_to_json(rep.spec);
  j["length"] = rep.length;
  j["n_reps"] = rep.n_reps;
  j["n_converged"] = rep.n_converged;
  j["convergence_rate"] = rep.convergence_rate;
  j["seed"] = rep.seed;
  json params = json::array();
  for (std::size_t i = 0; i < rep.names.size(); ++i) {
    json p;
    p["name"] = rep.names[i];
    p["truth"] = rep.truth[i];
    p["mean_estimate"] = rep.mean_estimate[i];
    p["made"] = rep.made[i];
    params.push_back(p);
  }
  j["parameters"] = params;
  return j;
}

inline std::string recovery_to_csv(const RecoveryReport& rep) {
  std::string out = "parameter,truth,mean_estimate,made\n";
  for (std::size_t i = 0; i < rep.names.size(); ++i)
    out += rep.names[i] + "," + format_double(rep.truth[i]) + "," +
           format_double(rep.mean_estimate[i]) + "," + format_double(rep.made[i]) + "\n";
  return out;
}

// Forecast CSV: date, realized, forecast, regime, converged.
inline std::string forecast_to_csv(const ForecastRun& run, std::span<const std::string> dates) {
  std::string out = "date,realized,forecast,regime,converged\n";
  for (const auto& step : run.steps) {
    const std::string date =
        step.origin < dates.size() ? dates[step.origin] : std::to_string(step.origin);
    out += date + "," + format_double(step.realized) + "," + format_double(step.forecast) + "," +
           regime_name(step.regime) + "," + (step.converged ? "1" : "0") + "\n";
  }
  return out;
}

// Fitted-path CSV: date, r, lambda, regime, residual (model-defined span only).
inline std::string lambda_to_csv(std::span<const RangeObs> series, const FitResult& fit,
                                 std::span<const std::string> dates) {
  std::string out = "date,r,lambda,regime,residual\n";
  const std::size_t t0 = fit.residuals.start;
  for (std::size_t t = t0; t < series.size(); ++t) {
    const std::string date = t < dates.size() ? dates[t] : std::to_string(t);
    out += date + "," + format_double(series[t].r) + "," +
           format_double(fit.path.total.lambda[t]) + "," +
           regime_name(fit.residuals.regime[t - t0]) + "," +
           format_double(fit.residuals.eps[t - t0]) + "\n";
  }
  return out;
}

inline constexpr double kAcfBand99 = 2.5758293035489004;  // z for a two-sided 99% band

inline std::string acf_to_csv(std::span<const double> acf, std::size_t n) {
  const double band = kAcfBand99 / std::sqrt(static_cast<double>(n));
  std::string out = "lag,acf,band99\n";
  for (std::size_t k = 0; k < acf.size(); ++k)
    out += std::to_string(k + 1) + "," + format_double(acf[k]) + "," + format_double(band) + "\n";
  return out;
}

inline json summary_to_json(const SummaryBlock& s) {
  json j;
  j["n"] = s.n;
  j["min"] = s.min;
  j["mean"] = s.mean;
  j["max"] = s.max;
  j["sd"] = s.sd;
  j["skewness"] = s.skewness;
  j["zeros"] = s.zeros;
  json q = json::array();
  for (const auto& t : s.q) q.push_back(test_to_json(t));
  j["ljung_box"] = q;
  return j;
}

// Minimal SVG renderers (no graphics dependency): a polyline series plot and
// an ACF needle plot with the confidence band.
inline std::string svg_series_plot(std::span<const double> values, const std::string& title) {
  const int width = 900, height = 240, margin = 30;
  double lo = values.empty() ? 0.0 : values[0], hi = lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<text x=\"8\" y=\"16\" font-size=\"12\">" + title + "</text>\n<polyline fill=\"none\" "
         "stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = margin + (width - 2.0 * margin) * static_cast<double>(i) /
                                  std::max<std::size_t>(values.size() - 1, 1);
    const double y = height - margin - (height - 2.0 * margin) * (values[i] - lo) / (hi - lo);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
    svg += buf;
  }
  svg += "\"/>\n</svg>\n";
  return svg;
}

inline std::string svg_acf_plot(std::span<const double> acf, std::size_t n,
                                const std::string& title) {
  const int width = 900, height = 240, margin = 30;
  const double band = kAcfBand99 / std::sqrt(static_cast<double>(n));
  const double hi = std::max(0.3, band * 1.5);
  const auto y_of = [&](double v) {
    return height / 2.0 - v * (height / 2.0 - margin) / hi;
  };
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<text x=\"8\" y=\"16\" font-size=\"12\">" + title + "</text>\n";
  char buf[200];
  for (const double b : {band, -band}) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#d62728\" "
                  "stroke-dasharray=\"4 3\"/>\n",
                  margin, y_of(b), width - margin, y_of(b));
    svg += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%.2f\" x2=\"%d\" y2=\"%.2f\" stroke=\"#333\"/>\n", margin,
                y_of(0.0), width - margin, y_of(0.0));
  svg += buf;
  for (std::size_t k = 0; k < acf.size(); ++k) {
    const double x = margin + (width - 2.0 * margin) * static_cast<double>(k + 1) /
                                  static_cast<double>(acf.size() + 1);
    const double v = std::clamp(acf[k], -hi, hi);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#1f77b4\" "
                  "stroke-width=\"2\"/>\n",
                  x, y_of(0.0), x, y_of(v));
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

// Transactional output directory: files written through an OutputWriter are
// removed again if the run fails before commit().
class OutputWriter {
 public:
  explicit OutputWriter(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }
  OutputWriter(const OutputWriter&) = delete;
  OutputWriter& operator=(const OutputWriter&) = delete;
  ~OutputWriter() {
    if (committed_) return;
    for (const auto& path : written_) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
  }

  std::string write(const std::string& filename, const std::string& content) {
    const std::string path = (std::filesystem::path(dir_) / filename).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << content;
    out.close();
    if (!out) throw data_error("write failed: " + path);
    written_.push_back(path);
    return path;
  }

  void commit() { committed_ = true; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  std::string dir_;
  std::vector<std::string> written_;
  bool committed_ = false;
};

}  // namespace rangevol
