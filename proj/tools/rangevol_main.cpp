// rangevol: range-based volatility modeling toolkit.
//
// Subcommands: ranges, fit, simulate, forecast, compare, diagnose.
// Exit codes: 0 success, 1 runtime/numerical failure, 2 usage/config error.
// Every command is deterministic for a fixed seed and input: machine-readable
// outputs are byte-identical across reruns.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rangevol/bootstrap.hpp"
#include "rangevol/csv.hpp"
#include "rangevol/diagnostics.hpp"
#include "rangevol/estimate.hpp"
#include "rangevol/forecast.hpp"
#include "rangevol/parallel.hpp"
#include "rangevol/range.hpp"
#include "rangevol/report.hpp"
#include "rangevol/simulate.hpp"
#include "rangevol/stats.hpp"

namespace rv = rangevol;
using rv::json;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 = hardware concurrency
  std::string output_dir = "out";
};

struct InputOptions {
  std::string path;
  std::string kind = "bars";  // bars | ranges
  rv::ColumnMap columns;
  double scale = 100.0;
  std::string from, to;
  bool zero_floor = false;
};

struct ModelOptions {
  std::string model = "lntacarr";
  std::string innovation;  // overrides a bare family name
  int p = 1, q = 1;
  std::vector<int> l = {1};
  int delay = 1;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::string constraints = "stationary";
};

struct EstimationOptions {
  int n_start = 8;
  int max_iter = 4000;
  double param_tol = 1e-8;
  double value_tol = 1e-10;
  int min_obs_per_param = 10;
  int refit_n_start = 2;
};

void add_input_options(CLI::App* cmd, InputOptions& in, bool with_zero_floor = true) {
  cmd->add_option("--input", in.path, "Input CSV file")->required();
  cmd->add_option("--input-kind", in.kind, "Input layout: bars (OHLC) or ranges (date,r,ru,rd)")
      ->check(CLI::IsMember({"bars", "ranges"}));
  cmd->add_option("--date-col", in.columns.date, "Date column name (bars input)");
  cmd->add_option("--open-col", in.columns.open, "Open column name");
  cmd->add_option("--high-col", in.columns.high, "High column name");
  cmd->add_option("--low-col", in.columns.low, "Low column name");
  cmd->add_option("--close-col", in.columns.close, "Close column name");
  cmd->add_option("--scale", in.scale, "Log-range scale (100 = percent-log units)");
  cmd->add_option("--from", in.from, "Keep dates >= this (ISO)");
  cmd->add_option("--to", in.to, "Keep dates <= this (ISO)");
  if (with_zero_floor)
    cmd->add_flag("--zero-floor", in.zero_floor,
                  "Replace zero ranges by half the smallest positive range");
}

void add_model_options(CLI::App* cmd, ModelOptions& m, bool multi_l) {
  cmd->add_option("--model", m.model,
                  "Model name: carr|acarr|facarr|tarr|tacarr, optionally prefixed e/ln");
  cmd->add_option("--innovation", m.innovation, "exponential | lognormal")
      ->check(CLI::IsMember({"exponential", "lognormal"}));
  cmd->add_option("--p", m.p, "Lagged-range order");
  cmd->add_option("--q", m.q, "Lagged-lambda order");
  if (multi_l)
    cmd->add_option("--l", m.l, "Regime window(s); a list fits one model per value")
        ->delimiter(',');
  else
    cmd->add_option("--l", m.l, "Regime window / feedback lag count")
        ->delimiter(',')
        ->expected(1);
  cmd->add_option("--delay", m.delay, "TARR threshold-variable lag d");
  cmd->add_option("--threshold", m.threshold, "TARR threshold (default: in-sample mean range)");
  cmd->add_option("--constraints", m.constraints, "stationary | positivity")
      ->check(CLI::IsMember({"stationary", "positivity"}));
}

void add_estimation_options(CLI::App* cmd, EstimationOptions& e) {
  cmd->add_option("--n-start", e.n_start, "Multi-start count");
  cmd->add_option("--max-iter", e.max_iter, "Optimizer iterations per start");
  cmd->add_option("--param-tol", e.param_tol, "Parameter tolerance");
  cmd->add_option("--value-tol", e.value_tol, "Log-likelihood tolerance");
  cmd->add_option("--min-obs-per-param", e.min_obs_per_param,
                  "Require n_eff >= this * k (0 disables)");
  cmd->add_option("--refit-n-start", e.refit_n_start, "Starts per warm rolling refit");
}

rv::ModelSpec make_spec(const ModelOptions& m, int l_value) {
  const auto parsed = rv::parse_model_name(m.model);
  if (!parsed) throw rv::argument_error("unknown model name: '" + m.model + "'");
  rv::ModelSpec spec;
  spec.family = parsed->family;
  spec.innovation = parsed->innovation.value_or(rv::Innovation::Exponential);
  if (!m.innovation.empty()) {
    if (parsed->innovation)
      throw rv::argument_error("model '" + m.model + "' already names an innovation law");
    spec.innovation =
        m.innovation == "lognormal" ? rv::Innovation::Lognormal : rv::Innovation::Exponential;
  }
  spec.p = m.p;
  spec.q = m.q;
  spec.l = l_value;
  spec.delay = m.delay;
  spec.threshold = m.threshold;
  spec.constraints = m.constraints == "stationary" ? rv::ConstraintMode::Stationary
                                                   : rv::ConstraintMode::PositivityOnly;
  rv::validate_spec(spec);
  return spec;
}

rv::FitOptions make_fit_options(const GlobalOptions& global, const EstimationOptions& e) {
  rv::FitOptions opts;
  opts.seed = global.seed;
  opts.n_start = e.n_start;
  opts.max_iter = e.max_iter;
  opts.param_tol = e.param_tol;
  opts.value_tol = e.value_tol;
  opts.min_obs_per_param = e.min_obs_per_param;
  opts.refit_n_start = e.refit_n_start;
  opts.jobs = 1;  // parallelism lives at the replication/start level per command
  return opts;
}

struct LoadedSeries {
  std::vector<std::string> dates;
  std::vector<rv::RangeObs> series;
  double zero_floor_applied = 0.0;
};

LoadedSeries load_series(const InputOptions& in) {
  if (!std::filesystem::exists(in.path))
    throw rv::data_error("input file does not exist: " + in.path);
  LoadedSeries out;
  if (in.kind == "bars") {
    auto bars = rv::ingest_csv(in.path, in.columns);
    if (!in.from.empty())
      std::erase_if(bars, [&](const rv::PriceBar& b) { return b.date < in.from; });
    if (!in.to.empty())
      std::erase_if(bars, [&](const rv::PriceBar& b) { return b.date > in.to; });
    if (bars.empty()) throw rv::data_error("no rows left after the date filter");
    out.series = rv::extract_ranges(bars, in.scale);
    out.dates.reserve(bars.size());
    for (const auto& b : bars) out.dates.push_back(b.date);
  } else {
    auto [dates, series] = rv::read_range_csv(in.path);
    if (!in.from.empty() || !in.to.empty()) {
      std::vector<std::string> fd;
      std::vector<rv::RangeObs> fs;
      for (std::size_t i = 0; i < dates.size(); ++i) {
        if (!in.from.empty() && dates[i] < in.from) continue;
        if (!in.to.empty() && dates[i] > in.to) continue;
        fd.push_back(dates[i]);
        fs.push_back(series[i]);
      }
      dates = std::move(fd);
      series = std::move(fs);
    }
    if (series.empty()) throw rv::data_error("no rows left after the date filter");
    out.dates = std::move(dates);
    out.series = std::move(series);
  }
  if (in.zero_floor) out.zero_floor_applied = rv::apply_zero_floor(out.series);
  return out;
}

// In-sample window length from either --window or --split-date.
std::size_t resolve_window(const LoadedSeries& data, std::size_t window,
                           const std::string& split_date) {
  if (window > 0 && !split_date.empty())
    throw rv::argument_error("--window and --split-date are mutually exclusive");
  if (window == 0 && split_date.empty())
    throw rv::argument_error("one of --window or --split-date is required");
  if (window > 0) {
    if (window >= data.series.size())
      throw rv::argument_error("--window must be smaller than the series length");
    return window;
  }
  if (split_date < data.dates.front() || split_date >= data.dates.back())
    throw rv::argument_error("--split-date " + split_date + " is outside the data range [" +
                             data.dates.front() + ", " + data.dates.back() + ")");
  std::size_t n = 0;
  while (n < data.dates.size() && data.dates[n] <= split_date) ++n;
  return n;
}

std::vector<rv::TestReport> residual_diagnostics(const rv::FitResult& fit, rv::KsMode ks_mode,
                                                 int ks_bootstrap, std::uint64_t seed, int jobs,
                                                 const rv::FitOptions& fit_opts) {
  std::vector<rv::TestReport> tests;
  const auto lb_lags = {1, 5, 22};
  if (rv::is_directional(fit.spec.family)) {
    const double t2u = fit.params.branches[0].theta2;
    const double t2d = fit.params.branches[1].theta2;
    auto up = rv::ks_test(fit.residuals_up->eps, fit.residuals_up->regime, fit.spec.innovation,
                          std::span<const double>(&t2u, 1), rv::KsMode::PooledPit);
    up.detail += "; upward component";
    tests.push_back(up);
    auto down = rv::ks_test(fit.residuals_down->eps, fit.residuals_down->regime,
                            fit.spec.innovation, std::span<const double>(&t2d, 1),
                            rv::KsMode::PooledPit);
    down.detail += "; downward component";
    tests.push_back(down);
    for (int h : lb_lags) {
      if (fit.residuals_up->eps.size() <= static_cast<std::size_t>(h)) continue;
      auto qu = rv::ljung_box(fit.residuals_up->eps, h);
      qu.detail += "; upward component";
      tests.push_back(qu);
      auto qd = rv::ljung_box(fit.residuals_down->eps, h);
      qd.detail += "; downward component";
      tests.push_back(qd);
    }
    if (ks_bootstrap > 0)
      throw rv::argument_error("--ks-bootstrap requires a total-range family (carr/tarr/tacarr)");
    return tests;
  }
  const auto theta2 = rv::detail::theta2_of(fit.spec, fit.params);
  if (ks_bootstrap > 0) {
    rv::FitOptions boot_opts = fit_opts;
    boot_opts.n_start = std::max(2, fit_opts.n_start / 4);
    tests.push_back(rv::ks_test_bootstrap(fit, ks_mode, ks_bootstrap,
                                          rv::Rng::derive(seed, 0xb00ULL), boot_opts, jobs));
  } else {
    tests.push_back(
        rv::ks_test(fit.residuals.eps, fit.residuals.regime, fit.spec.innovation, theta2, ks_mode));
  }
  for (int h : lb_lags)
    if (fit.residuals.eps.size() > static_cast<std::size_t>(h))
      tests.push_back(rv::ljung_box(fit.residuals.eps, h));
  return tests;
}

json input_echo(const InputOptions& in, const LoadedSeries& data) {
  json j;
  j["path"] = in.path;
  j["kind"] = in.kind;
  j["rows"] = data.series.size();
  j["scale"] = in.scale;
  if (!in.from.empty()) j["from"] = in.from;
  if (!in.to.empty()) j["to"] = in.to;
  if (data.zero_floor_applied > 0.0) j["zero_floor_applied"] = data.zero_floor_applied;
  return j;
}

// ---------------------------------------------------------------------------
// ranges
// ---------------------------------------------------------------------------

int cmd_ranges(const GlobalOptions& global, const InputOptions& in) {
  const LoadedSeries data = load_series(in);
  rv::OutputWriter out(global.output_dir);
  out.write("ranges.csv", rv::range_csv_text(data.dates, data.series));

  const auto column = [&](auto proj) {
    std::vector<double> v(data.series.size());
    for (std::size_t i = 0; i < data.series.size(); ++i) v[i] = proj(data.series[i]);
    return v;
  };
  json summary;
  summary["input"] = input_echo(in, data);
  summary["range"] = rv::summary_to_json(rv::summarize_series(column([](const rv::RangeObs& o) { return o.r; })));
  summary["upward_range"] = rv::summary_to_json(rv::summarize_series(column([](const rv::RangeObs& o) { return o.ru; })));
  summary["downward_range"] = rv::summary_to_json(rv::summarize_series(column([](const rv::RangeObs& o) { return o.rd; })));
  out.write("summary.json", summary.dump(2) + "\n");

  std::string text;
  for (const char* name : {"range", "upward_range", "downward_range"}) {
    const json& s = summary[name];
    text += std::string(name) + ": n=" + std::to_string(s["n"].get<std::size_t>()) +
            " min=" + rv::detail::fixed6(s["min"].get<double>()) +
            " mean=" + rv::detail::fixed6(s["mean"].get<double>()) +
            " max=" + rv::detail::fixed6(s["max"].get<double>()) +
            " sd=" + rv::detail::fixed6(s["sd"].get<double>()) +
            " skew=" + rv::detail::fixed6(s["skewness"].get<double>()) +
            " zeros=" + std::to_string(s["zeros"].get<std::size_t>()) + "\n";
    for (const auto& q : s["ljung_box"])
      text += "  Q(" + std::to_string(q["lags"].get<int>()) +
              ") = " + rv::detail::fixed6(q["statistic"].get<double>()) +
              " (p = " + rv::detail::fixed6(q["p_value"].get<double>()) + ")\n";
  }
  out.write("summary.txt", text);
  out.commit();
  std::cout << "wrote " << out.written().size() << " files to " << global.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const GlobalOptions& global, const InputOptions& in, const ModelOptions& model,
            const EstimationOptions& est, const std::string& ks_mode_name, int ks_bootstrap,
            int acf_lags, bool svg) {
  const LoadedSeries data = load_series(in);
  const rv::FitOptions fit_opts = make_fit_options(global, est);
  const rv::KsMode ks_mode =
      ks_mode_name == "per-regime" ? rv::KsMode::PerRegime : rv::KsMode::PooledPit;
  const int jobs = global.jobs > 0 ? global.jobs : rv::default_jobs();

  std::vector<int> l_values = model.l;
  if (l_values.empty()) l_values = {1};

  rv::OutputWriter out(global.output_dir);
  json selection = json::array();
  const bool multi = l_values.size() > 1;
  double best_aic = 0.0;
  int best_l = l_values.front();

  for (const int l_value : l_values) {
    const rv::ModelSpec spec = make_spec(model, l_value);
    const rv::FitResult fit = rv::fit(data.series, spec, fit_opts);
    const auto tests =
        residual_diagnostics(fit, ks_mode, ks_bootstrap, global.seed, jobs, fit_opts);
    const auto accuracy = rv::insample_accuracy(data.series, fit.path);

    json report = rv::fit_to_json(fit, tests, accuracy, global.seed);
    report["input"] = input_echo(in, data);
    const std::string stem = multi ? "fit_l" + std::to_string(l_value) : "fit";
    out.write(stem + ".json", report.dump(2) + "\n");
    out.write(stem + ".txt", rv::fit_to_text(fit, tests, accuracy));
    out.write(multi ? "lambda_l" + std::to_string(l_value) + ".csv" : "lambda.csv",
              rv::lambda_to_csv(data.series, fit, data.dates));
    if (fit.residuals.eps.size() > static_cast<std::size_t>(acf_lags)) {
      const auto acf = rv::autocorrelations(fit.residuals.eps, acf_lags);
      const std::string acf_stem =
          multi ? "residual_acf_l" + std::to_string(l_value) : "residual_acf";
      out.write(acf_stem + ".csv", rv::acf_to_csv(acf, fit.residuals.eps.size()));
      if (svg)
        out.write(acf_stem + ".svg",
                  rv::svg_acf_plot(acf, fit.residuals.eps.size(),
                                   "Residual ACF, " + rv::model_label(fit.spec)));
    }
    json row;
    row["l"] = l_value;
    row["llf"] = fit.llf;
    row["aic"] = fit.aic;
    row["bic"] = fit.bic;
    row["n_eff"] = fit.n_eff;
    row["converged"] = fit.converged;
    selection.push_back(row);
    if (selection.size() == 1 || fit.aic < best_aic) {
      best_aic = fit.aic;
      best_l = l_value;
    }
  }

  if (multi) {
    json sel;
    sel["candidates"] = selection;
    sel["selected_l"] = best_l;
    sel["criterion"] = "lowest AIC";
    out.write("model_selection.json", sel.dump(2) + "\n");
    std::string text = "l      llf            aic            bic\n";
    for (const auto& row : selection) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-6d %-14.4f %-14.4f %-14.4f%s\n", row["l"].get<int>(),
                    row["llf"].get<double>(), row["aic"].get<double>(), row["bic"].get<double>(),
                    row["l"].get<int>() == best_l ? "  <- selected" : "");
      text += buf;
    }
    out.write("model_selection.txt", text);
  }
  out.commit();
  std::cout << "wrote " << out.written().size() << " files to " << global.output_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

rv::ParamVector params_from_pairs(const rv::ModelSpec& spec,
                                  const std::vector<std::string>& pairs) {
  const auto names = rv::param_names(spec);
  std::map<std::string, double> given;
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw rv::argument_error("--param expects name=value, got '" + pair + "'");
    const std::string name = pair.substr(0, eq);
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw rv::argument_error("--param: unknown parameter '" + name + "' for this model");
    if (given.count(name)) throw rv::argument_error("--param: duplicate parameter '" + name + "'");
    given[name] = rv::parse_double(pair.substr(eq + 1), "--param " + name);
  }
  std::vector<double> flat;
  std::string missing;
  for (const auto& name : names) {
    const auto it = given.find(name);
    if (it == given.end()) {
      missing += (missing.empty() ? "" : ", ") + name;
      continue;
    }
    flat.push_back(it->second);
  }
  if (!missing.empty())
    throw rv::argument_error("--param: missing parameters: " + missing);
  return rv::unflatten(spec, flat);
}

int cmd_simulate(const GlobalOptions& global, const ModelOptions& model,
                 const EstimationOptions& est, const std::vector<std::string>& params,
                 std::size_t length, std::size_t reps, std::size_t burn_in,
                 const std::string& split_name, double beta_a, double beta_b, bool resume) {
  rv::SimConfig config;
  config.spec = make_spec(model, model.l.empty() ? 1 : model.l.front());
  if (rv::is_directional(config.spec.family))
    throw rv::argument_error("simulate: generate from carr, tarr or tacarr");
  if (config.spec.family == rv::Family::Tarr && std::isnan(config.spec.threshold))
    throw rv::argument_error("simulate: --threshold is required for a TARR generator");
  config.params = params_from_pairs(config.spec, params);
  rv::validate_params(config.spec, config.params);
  config.length = length;
  config.n_reps = reps;
  config.burn_in = burn_in;
  config.seed = global.seed;
  config.split.kind = split_name == "beta" ? rv::SplitKind::Beta : rv::SplitKind::Uniform;
  config.split.beta_a = beta_a;
  config.split.beta_b = beta_b;

  const rv::FitOptions fit_opts = make_fit_options(global, est);
  const int jobs = global.jobs > 0 ? global.jobs : rv::default_jobs();

  // Replications are seeded by index, so a partial checkpoint can be resumed
  // and completed in any order with identical results. The checkpoint lives
  // outside the transactional writer: it must survive an interrupted run.
  std::filesystem::create_directories(global.output_dir);
  const std::string checkpoint_path =
      (std::filesystem::path(global.output_dir) / "checkpoint.jsonl").string();
  std::vector<std::optional<rv::ReplicationRow>> rows(config.n_reps);
  if (resume && std::filesystem::exists(checkpoint_path)) {
    std::ifstream ck(checkpoint_path);
    std::string line;
    while (std::getline(ck, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;  // torn tail line from an interrupted run
      rv::ReplicationRow row;
      row.index = j.at("index").get<std::size_t>();
      row.converged = j.at("converged").get<bool>();
      row.beat_truth = j.value("beat_truth", true);
      row.llf = j.at("llf").get<double>();
      row.estimate = j.at("estimate").get<std::vector<double>>();
      if (row.index < rows.size() &&
          row.estimate.size() == static_cast<std::size_t>(rv::param_count(config.spec)))
        rows[row.index] = std::move(row);
    }
  }

  const auto row_to_line = [](const rv::ReplicationRow& row) {
    json j;
    j["index"] = row.index;
    j["converged"] = row.converged;
    j["beat_truth"] = row.beat_truth;
    j["llf"] = row.llf;
    j["estimate"] = row.estimate;
    return j.dump() + "\n";
  };

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i]) todo.push_back(i);
  {
    std::ofstream append(checkpoint_path, resume ? std::ios::app : std::ios::trunc);
    std::mutex io_mutex;
    rv::parallel_for(todo.size(), jobs, [&](std::size_t i) {
      rv::ReplicationRow row = rv::run_replication(config, todo[i], fit_opts);
      std::lock_guard<std::mutex> lock(io_mutex);
      append << row_to_line(row) << std::flush;
      rows[todo[i]] = std::move(row);
    });
  }

  std::vector<rv::ReplicationRow> ordered;
  ordered.reserve(rows.size());
  for (auto& row : rows) ordered.push_back(std::move(*row));
  const rv::RecoveryReport report = rv::aggregate_recovery(config, ordered);

  // Rewrite the checkpoint in index order so the completed run's outputs are
  // byte-identical however the work was partitioned.
  {
    std::ofstream ck(checkpoint_path, std::ios::trunc);
    for (const auto& row : ordered) ck << row_to_line(row);
  }

  rv::OutputWriter out(global.output_dir);
  json j = rv::recovery_to_json(report);
  j["burn_in"] = config.burn_in;
  j["split"] = split_name;
  out.write("recovery.json", j.dump(2) + "\n");
  out.write("recovery.csv", rv::recovery_to_csv(report));
  out.commit();
  std::cout << "recovery study: " << report.n_converged << "/" << report.n_reps
            << " replications converged\n";
  return 0;
}

// ---------------------------------------------------------------------------
// forecast / compare
// ---------------------------------------------------------------------------

int cmd_forecast(const GlobalOptions& global, const InputOptions& in, const ModelOptions& model,
                 const EstimationOptions& est, std::size_t window, const std::string& split_date,
                 int refit_every) {
  const LoadedSeries data = load_series(in);
  const std::size_t n = resolve_window(data, window, split_date);
  const rv::ModelSpec spec = make_spec(model, model.l.empty() ? 1 : model.l.front());
  const rv::FitOptions fit_opts = make_fit_options(global, est);

  const rv::ForecastRun run = rv::rolling_forecast(data.series, spec, n, fit_opts, refit_every);

  rv::OutputWriter out(global.output_dir);
  out.write("forecast.csv", rv::forecast_to_csv(run, data.dates));
  json j;
  j["model"] = rv::spec_to_json(spec);
  j["input"] = input_echo(in, data);
  j["window"] = run.window_length;
  j["refit_every"] = run.refit_every;
  j["steps"] = run.steps.size();
  j["rmse"] = run.rmse;
  j["mae"] = run.mae;
  j["seed"] = global.seed;
  std::size_t not_converged = 0;
  for (const auto& s : run.steps)
    if (!s.converged) ++not_converged;
  j["steps_not_converged"] = not_converged;
  out.write("forecast.json", j.dump(2) + "\n");
  out.commit();
  std::cout << "forecast: " << run.steps.size() << " steps, rmse=" << run.rmse
            << " mae=" << run.mae << "\n";
  return 0;
}

int cmd_compare(const GlobalOptions& global, const InputOptions& in,
                const EstimationOptions& est, const std::vector<std::string>& model_names,
                std::string baseline, std::size_t window, const std::string& split_date,
                int refit_every, const std::string& loss_name) {
  if (model_names.size() < 2)
    throw rv::argument_error("compare: need at least two models (--models a,b,...)");
  const LoadedSeries data = load_series(in);
  const std::size_t n = resolve_window(data, window, split_date);
  const rv::LossKind loss =
      loss_name == "absolute" ? rv::LossKind::Absolute : rv::LossKind::Squared;
  if (baseline.empty()) baseline = model_names.front();
  if (std::find(model_names.begin(), model_names.end(), baseline) == model_names.end())
    throw rv::argument_error("compare: baseline '" + baseline + "' is not in the model list");

  struct Entry {
    std::string name;
    rv::ModelSpec spec;
    rv::ForecastRun run;
    std::vector<double> errors;
  };
  std::vector<Entry> entries;
  for (const auto& name : model_names) {
    ModelOptions m;
    m.model = name;
    Entry e;
    e.name = name;
    e.spec = make_spec(m, 1);
    rv::FitOptions fit_opts = make_fit_options(global, est);
    e.run = rv::rolling_forecast(data.series, e.spec, n, fit_opts, refit_every);
    for (const auto& s : e.run.steps) e.errors.push_back(s.realized - s.forecast);
    entries.push_back(std::move(e));
  }

  // Baseline by first occurrence, so a model listed twice is compared with
  // itself (a degenerate "no difference" DM report).
  std::size_t base_idx = 0;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == baseline) {
      base_idx = i;
      break;
    }
  const Entry* base = &entries[base_idx];

  json j;
  j["input"] = input_echo(in, data);
  j["window"] = n;
  j["refit_every"] = refit_every;
  j["loss"] = loss_name;
  j["baseline"] = baseline;
  j["seed"] = global.seed;
  json accuracy = json::array();
  for (const auto& e : entries) {
    json row;
    row["model"] = e.name;
    row["label"] = rv::model_label(e.spec);
    row["rmse"] = e.run.rmse;
    row["mae"] = e.run.mae;
    accuracy.push_back(row);
  }
  j["accuracy"] = accuracy;
  json dm_rows = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i == base_idx) continue;
    const Entry& e = entries[i];
    const rv::TestReport dm = rv::dm_test(base->errors, e.errors, loss);
    json row;
    row["null"] = "forecast " + e.name + " is same or more accurate than " + baseline;
    row["competitor"] = e.name;
    row["statistic"] = dm.statistic;
    row["p_value"] = dm.p_value;
    row["detail"] = dm.detail;
    dm_rows.push_back(row);
  }
  j["dm_tests"] = dm_rows;

  rv::OutputWriter out(global.output_dir);
  out.write("comparison.json", j.dump(2) + "\n");
  std::string text = rv::detail::pad("model", 22) + rv::detail::pad("rmse", 12) + "mae\n";
  for (const auto& e : entries)
    text += rv::detail::pad(rv::model_label(e.spec), 22) + rv::detail::pad(rv::detail::fixed6(e.run.rmse), 12) +
            rv::detail::fixed6(e.run.mae) + "\n";
  text += "\nDM tests (positive statistic favors the baseline " + baseline + "):\n";
  for (const auto& row : dm_rows)
    text += "  vs " + rv::detail::pad(row["competitor"].get<std::string>(), 12) + " DM = " +
            rv::detail::fixed6(row["statistic"].get<double>()) +
            "  (p = " + rv::detail::fixed6(row["p_value"].get<double>()) + ")\n";
  out.write("comparison.txt", text);
  for (const auto& e : entries)
    out.write("forecast_" + e.name + ".csv", rv::forecast_to_csv(e.run, data.dates));
  out.commit();
  std::cout << "compared " << entries.size() << " models over " << (data.series.size() - n)
            << " forecasts\n";
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

int cmd_diagnose(const GlobalOptions& global, const InputOptions& in, const ModelOptions& model,
                 const EstimationOptions& est, const std::string& ks_mode_name, int ks_bootstrap) {
  const LoadedSeries data = load_series(in);
  const rv::ModelSpec spec = make_spec(model, model.l.empty() ? 1 : model.l.front());
  const rv::FitOptions fit_opts = make_fit_options(global, est);
  const rv::KsMode ks_mode =
      ks_mode_name == "per-regime" ? rv::KsMode::PerRegime : rv::KsMode::PooledPit;
  const int jobs = global.jobs > 0 ? global.jobs : rv::default_jobs();

  const rv::FitResult fit = rv::fit(data.series, spec, fit_opts);
  const auto tests = residual_diagnostics(fit, ks_mode, ks_bootstrap, global.seed, jobs, fit_opts);

  json j;
  j["model"] = rv::spec_to_json(fit.spec);
  j["input"] = input_echo(in, data);
  j["llf"] = fit.llf;
  j["converged"] = fit.converged;
  j["seed"] = global.seed;
  json diag = json::array();
  for (const auto& t : tests) diag.push_back(rv::test_to_json(t));
  j["diagnostics"] = diag;

  rv::OutputWriter out(global.output_dir);
  out.write("diagnostics.json", j.dump(2) + "\n");
  std::string text = "Model: " + rv::model_label(fit.spec) + "\n\n";
  text += rv::detail::pad("test", 14) + rv::detail::pad("statistic", 14) +
          rv::detail::pad("p-value", 12) + "detail\n";
  for (const auto& t : tests) {
    const std::string name = t.test == "ljung_box" ? "Q(" + std::to_string(t.lags) + ")" : t.test;
    text += rv::detail::pad(name, 14) + rv::detail::pad(rv::detail::fixed6(t.statistic), 14) +
            rv::detail::pad(rv::detail::fixed6(t.p_value), 12) + t.detail + "\n";
  }
  out.write("diagnostics.txt", text);
  out.commit();
  std::cout << "wrote diagnostics to " << global.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rangevol: range-based volatility modeling (CARR family with regime switching)"};
  app.fallthrough();  // global flags (--seed, --jobs, ...) may follow a subcommand
  app.set_config("--config", "", "Read options from a TOML config file");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master RNG seed")->capture_default_str();
  app.add_option("--jobs", global.jobs, "Worker threads (0 = hardware)")->capture_default_str();
  app.add_option("--output-dir", global.output_dir, "Output directory")->capture_default_str();
  app.require_subcommand(1);

  // ranges
  auto* ranges_cmd = app.add_subcommand("ranges", "Extract range series and summary statistics");
  InputOptions ranges_in;
  add_input_options(ranges_cmd, ranges_in);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and emit estimates and diagnostics");
  InputOptions fit_in;
  ModelOptions fit_model;
  EstimationOptions fit_est;
  std::string fit_ks_mode = "pooled";
  int fit_ks_bootstrap = 0;
  int fit_acf_lags = 30;
  bool fit_svg = false;
  add_input_options(fit_cmd, fit_in);
  add_model_options(fit_cmd, fit_model, true);
  add_estimation_options(fit_cmd, fit_est);
  fit_cmd->add_option("--ks-mode", fit_ks_mode, "KS mode: pooled | per-regime")
      ->check(CLI::IsMember({"pooled", "per-regime"}));
  fit_cmd->add_option("--ks-bootstrap", fit_ks_bootstrap,
                      "Parametric-bootstrap KS p-value with this many refits (0 = off)");
  fit_cmd->add_option("--acf-lags", fit_acf_lags, "Residual ACF lag count");
  fit_cmd->add_flag("--svg", fit_svg, "Render the residual ACF as SVG");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo parameter-recovery study");
  ModelOptions sim_model;
  EstimationOptions sim_est;
  std::vector<std::string> sim_params;
  std::size_t sim_length = 1000, sim_reps = 200, sim_burn = 500;
  std::string sim_split = "uniform";
  double sim_beta_a = 1.0, sim_beta_b = 1.0;
  bool sim_resume = false;
  add_model_options(sim_cmd, sim_model, false);
  add_estimation_options(sim_cmd, sim_est);
  sim_cmd->add_option("--param", sim_params, "True parameter name=value (repeatable)")
      ->required();
  sim_cmd->add_option("--length", sim_length, "Path length T")->capture_default_str();
  sim_cmd->add_option("--reps", sim_reps, "Replication count")->capture_default_str();
  sim_cmd->add_option("--burn-in", sim_burn, "Discarded leading steps")->capture_default_str();
  sim_cmd->add_option("--split", sim_split, "Upward/downward split: uniform | beta")
      ->check(CLI::IsMember({"uniform", "beta"}));
  sim_cmd->add_option("--beta-a", sim_beta_a, "Beta split shape a");
  sim_cmd->add_option("--beta-b", sim_beta_b, "Beta split shape b");
  sim_cmd->add_flag("--resume", sim_resume, "Reuse replications from checkpoint.jsonl");

  // forecast
  auto* fc_cmd = app.add_subcommand("forecast", "Rolling one-step-ahead forecasts");
  InputOptions fc_in;
  ModelOptions fc_model;
  EstimationOptions fc_est;
  std::size_t fc_window = 0;
  std::string fc_split_date;
  int fc_refit_every = 1;
  add_input_options(fc_cmd, fc_in);
  add_model_options(fc_cmd, fc_model, false);
  add_estimation_options(fc_cmd, fc_est);
  fc_cmd->add_option("--window", fc_window, "In-sample window length N");
  fc_cmd->add_option("--split-date", fc_split_date, "Last in-sample date (alternative to --window)");
  fc_cmd->add_option("--refit-every", fc_refit_every, "Refit cadence (1 = every step)");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Multi-model forecast comparison with DM tests");
  InputOptions cmp_in;
  EstimationOptions cmp_est;
  std::vector<std::string> cmp_models;
  std::string cmp_baseline;
  std::size_t cmp_window = 0;
  std::string cmp_split_date;
  int cmp_refit_every = 1;
  std::string cmp_loss = "squared";
  add_input_options(cmp_cmd, cmp_in);
  add_estimation_options(cmp_cmd, cmp_est);
  cmp_cmd->add_option("--models", cmp_models, "Model names (comma separated)")
      ->delimiter(',')
      ->required();
  cmp_cmd->add_option("--baseline", cmp_baseline, "Baseline model for DM tests (default: first)");
  cmp_cmd->add_option("--window", cmp_window, "In-sample window length N");
  cmp_cmd->add_option("--split-date", cmp_split_date, "Last in-sample date");
  cmp_cmd->add_option("--refit-every", cmp_refit_every, "Refit cadence");
  cmp_cmd->add_option("--loss", cmp_loss, "DM loss: squared | absolute")
      ->check(CLI::IsMember({"squared", "absolute"}));

  // diagnose
  auto* diag_cmd = app.add_subcommand("diagnose", "Fit a model and emit residual tests only");
  InputOptions diag_in;
  ModelOptions diag_model;
  EstimationOptions diag_est;
  std::string diag_ks_mode = "pooled";
  int diag_ks_bootstrap = 0;
  add_input_options(diag_cmd, diag_in);
  add_model_options(diag_cmd, diag_model, false);
  add_estimation_options(diag_cmd, diag_est);
  diag_cmd->add_option("--ks-mode", diag_ks_mode, "KS mode: pooled | per-regime")
      ->check(CLI::IsMember({"pooled", "per-regime"}));
  diag_cmd->add_option("--ks-bootstrap", diag_ks_bootstrap,
                       "Parametric-bootstrap KS p-value with this many refits (0 = off)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (ranges_cmd->parsed()) return cmd_ranges(global, ranges_in);
    if (fit_cmd->parsed())
      return cmd_fit(global, fit_in, fit_model, fit_est, fit_ks_mode, fit_ks_bootstrap,
                     fit_acf_lags, fit_svg);
    if (sim_cmd->parsed())
      return cmd_simulate(global, sim_model, sim_est, sim_params, sim_length, sim_reps, sim_burn,
                          sim_split, sim_beta_a, sim_beta_b, sim_resume);
    if (fc_cmd->parsed())
      return cmd_forecast(global, fc_in, fc_model, fc_est, fc_window, fc_split_date,
                          fc_refit_every);
    if (cmp_cmd->parsed())
      return cmd_compare(global, cmp_in, cmp_est, cmp_models, cmp_baseline, cmp_window,
                         cmp_split_date, cmp_refit_every, cmp_loss);
    if (diag_cmd->parsed())
      return cmd_diagnose(global, diag_in, diag_model, diag_est, diag_ks_mode, diag_ks_bootstrap);
  } catch (const rv::argument_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rv::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
