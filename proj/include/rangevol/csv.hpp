#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rangevol/common.hpp"
#include "rangevol/diagnostics.hpp"
#include "rangevol/range.hpp"
#include "rangevol/stats.hpp"

// CSV ingestion and emission. Doubles are emitted with %.17g so every series
// written by the toolkit re-ingests to the exact in-memory values.
namespace rangevol {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rows[i] aligns with header
  std::vector<std::size_t> line_numbers;       // 1-based source line per row
};

// Minimal RFC-4180-style parser: quoted fields, escaped quotes, CRLF.
inline CsvTable parse_csv(const std::string& text, const std::string& context) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  std::size_t line = 1;
  const auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  const auto end_row = [&](std::size_t row_line) {
    end_field();
    if (row.size() == 1 && row[0].empty()) {
      row.clear();
      return;  // blank line
    }
    if (table.header.empty()) {
      table.header = std::move(row);
    } else {
      if (row.size() != table.header.size())
        throw data_error(context + ": line " + std::to_string(row_line) + " has " +
                         std::to_string(row.size()) + " fields, header has " +
                         std::to_string(table.header.size()));
      table.rows.push_back(std::move(row));
      table.line_numbers.push_back(row_line);
    }
    row.clear();
  };
  std::size_t row_start_line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': in_quotes = true; break;
      case ',': end_field(); break;
      case '\r': break;
      case '\n':
        end_row(row_start_line);
        ++line;
        row_start_line = line;
        break;
      default: field += c;
    }
  }
  if (in_quotes) throw data_error(context + ": unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row(row_start_line);
  if (table.header.empty()) throw data_error(context + ": empty file");
  return table;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline CsvTable read_csv_file(const std::string& path) {
  return parse_csv(read_text_file(path), path);
}

// Shortest exact decimal representation: round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
  if (s.empty()) throw data_error(context + ": empty numeric cell");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw data_error(context + ": not numeric: '" + s + "'");
  return v;
}

struct ColumnMap {
  std::string date = "date";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::size_t column_index(const CsvTable& table, const std::string& name,
                                const std::string& context) {
  const std::string want = lower(name);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (lower(table.header[i]) == want) return i;
  throw data_error(context + ": missing column '" + name + "'");
}

inline bool valid_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace detail

// Price-bar ingestion: validates the CSV shape, the numeric cells, ISO dates,
// duplicate dates, and every bar invariant; rows are sorted by date. Errors
// name the offending source line.
inline std::vector<PriceBar> bars_from_table(const CsvTable& table, const ColumnMap& columns,
                                             const std::string& context) {
  const std::size_t c_date = detail::column_index(table, columns.date, context);
  const std::size_t c_open = detail::column_index(table, columns.open, context);
  const std::size_t c_high = detail::column_index(table, columns.high, context);
  const std::size_t c_low = detail::column_index(table, columns.low, context);
  const std::size_t c_close = detail::column_index(table, columns.close, context);

  std::vector<std::pair<PriceBar, std::size_t>> bars;
  bars.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = context + ": line " + std::to_string(table.line_numbers[i]);
    PriceBar bar;
    bar.date = row[c_date];
    if (!detail::valid_iso_date(bar.date))
      throw data_error(where + ": date '" + bar.date + "' is not ISO YYYY-MM-DD");
    bar.open = parse_double(row[c_open], where + " column '" + columns.open + "'");
    bar.high = parse_double(row[c_high], where + " column '" + columns.high + "'");
    bar.low = parse_double(row[c_low], where + " column '" + columns.low + "'");
    bar.close = parse_double(row[c_close], where + " column '" + columns.close + "'");
    try {
      validate_bar(bar, i);
    } catch (const data_error& e) {
      throw data_error(where + ": " + e.what());
    }
    bars.emplace_back(std::move(bar), table.line_numbers[i]);
  }
  std::stable_sort(bars.begin(), bars.end(),
                   [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
  for (std::size_t i = 1; i < bars.size(); ++i)
    if (bars[i].first.date == bars[i - 1].first.date)
      throw data_error(context + ": duplicate date " + bars[i].first.date + " (lines " +
                       std::to_string(bars[i - 1].second) + " and " +
                       std::to_string(bars[i].second) + ")");
  std::vector<PriceBar> out;
  out.reserve(bars.size());
  for (auto& [bar, line] : bars) out.push_back(std::move(bar));
  return out;
}

inline std::vector<PriceBar> ingest_csv(const std::string& path, const ColumnMap& columns = {}) {
  return bars_from_table(read_csv_file(path), columns, path);
}

// Range-series CSV: date,r,ru,rd. Row order is preserved as written (these
// files are toolkit emissions keyed by arbitrary strings).
inline std::string range_csv_text(std::span<const std::string> dates,
                                  std::span<const RangeObs> series) {
  if (dates.size() != series.size()) throw argument_error("range_csv_text: length mismatch");
  std::string out = "date,r,ru,rd\n";
  for (std::size_t i = 0; i < series.size(); ++i)
    out += dates[i] + "," + format_double(series[i].r) + "," + format_double(series[i].ru) + "," +
           format_double(series[i].rd) + "\n";
  return out;
}

inline std::pair<std::vector<std::string>, std::vector<RangeObs>> ranges_from_table(
    const CsvTable& table, const std::string& context) {
  const std::size_t c_date = detail::column_index(table, "date", context);
  const std::size_t c_r = detail::column_index(table, "r", context);
  const std::size_t c_ru = detail::column_index(table, "ru", context);
  const std::size_t c_rd = detail::column_index(table, "rd", context);
  std::vector<std::string> dates;
  std::vector<RangeObs> series;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = context + ": line " + std::to_string(table.line_numbers[i]);
    RangeObs obs;
    obs.r = parse_double(table.rows[i][c_r], where);
    obs.ru = parse_double(table.rows[i][c_ru], where);
    obs.rd = parse_double(table.rows[i][c_rd], where);
    if (obs.ru < 0.0 || obs.rd < 0.0 || obs.r < 0.0)
      throw data_error(where + ": negative range component");
    dates.push_back(table.rows[i][c_date]);
    series.push_back(obs);
  }
  return {std::move(dates), std::move(series)};
}

inline std::pair<std::vector<std::string>, std::vector<RangeObs>> read_range_csv(
    const std::string& path) {
  return ranges_from_table(read_csv_file(path), path);
}

// Replace zero total ranges by half the smallest positive observed range,
// splitting the floor evenly between the components so r == ru + rd and the
// up/down tie classification are preserved. Returns the floor applied (0 when
// nothing changed).
inline double apply_zero_floor(std::span<RangeObs> series) {
  double smallest = 0.0;
  for (const auto& o : series)
    if (o.r > 0.0 && (smallest == 0.0 || o.r < smallest)) smallest = o.r;
  if (smallest == 0.0) throw data_error("zero-floor: series has no positive ranges");
  const double floor_value = 0.5 * smallest;
  bool changed = false;
  for (auto& o : series)
    if (o.r == 0.0) {
      o.ru = 0.5 * floor_value;
      o.rd = 0.5 * floor_value;
      o.r = o.ru + o.rd;
      changed = true;
    }
  return changed ? floor_value : 0.0;
}

// Summary block mirroring the per-series descriptive table: count, extremes,
// moments, zero count, and Ljung-Box statistics at lags 1, 5, 22.
struct SummaryBlock {
  std::size_t n = 0;
  double min = 0.0, mean = 0.0, max = 0.0, sd = 0.0, skewness = 0.0;
  std::size_t zeros = 0;
  std::vector<TestReport> q;  // Q(1), Q(5), Q(22) where the sample allows
};

inline SummaryBlock summarize_series(std::span<const double> x) {
  if (x.empty()) throw argument_error("summarize_series: empty series");
  SummaryBlock s;
  s.n = x.size();
  s.min = *std::min_element(x.begin(), x.end());
  s.max = *std::max_element(x.begin(), x.end());
  s.mean = mean_of(x);
  s.sd = sd_of(x);
  s.skewness = skewness_of(x);
  s.zeros = static_cast<std::size_t>(std::count(x.begin(), x.end(), 0.0));
  for (int h : {1, 5, 22})
    if (x.size() > static_cast<std::size_t>(h)) s.q.push_back(ljung_box(x, h));
  return s;
}

}  // namespace rangevol
