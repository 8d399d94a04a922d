/*
 * Copyright 2026 the agroval authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "agroval/errors.hpp"
#include "agroval/panels.hpp"

namespace agroval {

struct YearRange {
  int first;
  int last;

  bool contains(int year) const { return year >= first && year <= last; }
};

/// National quadratic yield trend p(t) = a t^2 + b t + c over calendar year
/// t, with p_max the maximum of p over integer years in the fit window.
/// Detrending removes p(t) and adds p_max back, so detrended yields live
/// near the trend's peak.
struct QuadraticTrend {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  YearRange window{0, 0};
  double p_max = 0.0;

  double at(int year) const {
    const double t = static_cast<double>(year);
    return (a * t + b) * t + c;
  }
};

enum class TargetKind { Yield, GapAbs, GapRatio, Anomaly };

inline const char* target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::Yield: return "yield";
    case TargetKind::GapAbs: return "gap_abs";
    case TargetKind::GapRatio: return "gap_ratio";
    case TargetKind::Anomaly: return "anomaly";
  }
  return "?";
}

inline TargetKind parse_target_kind(const std::string& name) {
  if (name == "yield") return TargetKind::Yield;
  if (name == "gap_abs") return TargetKind::GapAbs;
  if (name == "gap_ratio") return TargetKind::GapRatio;
  if (name == "anomaly") return TargetKind::Anomaly;
  throw Error::data("UnknownTargetKind", "unknown target kind '" + name + "'");
}

/// (region, year) -> target value. Units are t/ha for yield and gap_abs,
/// percent for gap_ratio and anomaly.
struct TargetTable {
  TargetKind kind = TargetKind::Yield;
  std::map<std::pair<RegionId, int>, double> values;
  QuadraticTrend trend;     // provenance
  YearRange window{0, 0};   // provenance
  int dropped_rows = 0;     // rows lost to sparse anomaly windows
};

/// Least-squares quadratic through the unweighted national mean per year.
/// The solve runs in a year-centered basis for conditioning and expands the
/// coefficients back to calendar years.
inline QuadraticTrend fit_national_trend(const YieldPanel& yields,
                                         YearRange window) {
  const auto means = yields.national_means();
  std::vector<double> ts, ys;
  for (const auto& [year, mean] : means) {
    if (!window.contains(year)) continue;
    ts.push_back(static_cast<double>(year));
    ys.push_back(mean);
  }
  if (ts.size() < 3)
    throw Error::data("InsufficientYears",
                      "quadratic trend needs >= 3 years with data, have " +
                          std::to_string(ts.size()));

  double t_mean = 0.0;
  for (double t : ts) t_mean += t;
  t_mean /= static_cast<double>(ts.size());

  // Normal equations in powers of (t - t_mean).
  double s[5] = {0, 0, 0, 0, 0};
  double r[3] = {0, 0, 0};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double u = ts[i] - t_mean;
    double p = 1.0;
    for (int k = 0; k <= 4; ++k, p *= u) s[k] += p;
    r[0] += ys[i];
    r[1] += ys[i] * u;
    r[2] += ys[i] * u * u;
  }
  double m[3][4] = {{s[0], s[1], s[2], r[0]},
                    {s[1], s[2], s[3], r[1]},
                    {s[2], s[3], s[4], r[2]}};
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
    std::swap(m[col], m[pivot]);
    if (m[col][col] == 0.0)
      throw Error::data("InsufficientYears", "degenerate trend system");
    for (int row = col + 1; row < 3; ++row) {
      const double f = m[row][col] / m[col][col];
      for (int k = col; k < 4; ++k) m[row][k] -= f * m[col][k];
    }
  }
  double beta[3];
  for (int row = 2; row >= 0; --row) {
    double acc = m[row][3];
    for (int k = row + 1; k < 3; ++k) acc -= m[row][k] * beta[k];
    beta[row] = acc / m[row][row];
  }
  // Expand gamma0 + gamma1 u + gamma2 u^2, u = t - t_mean, to powers of t.
  QuadraticTrend trend;
  trend.a = beta[2];
  trend.b = beta[1] - 2.0 * beta[2] * t_mean;
  trend.c = beta[0] - beta[1] * t_mean + beta[2] * t_mean * t_mean;
  trend.window = window;
  trend.p_max = -std::numeric_limits<double>::infinity();
  for (int year = window.first; year <= window.last; ++year)
    trend.p_max = std::max(trend.p_max, trend.at(year));
  return trend;
}

/// y_det(r, t) = y(r, t) - p(t) + p_max.
inline YieldPanel detrend(const YieldPanel& yields,
                          const QuadraticTrend& trend) {
  YieldPanel out;
  out.records.reserve(yields.records.size());
  for (const auto& rec : yields.records) {
    if (!trend.window.contains(rec.year))
      throw Error::data("YearOutsideTrend",
                        "year " + std::to_string(rec.year) +
                            " outside trend window " +
                            std::to_string(trend.window.first) + ".." +
                            std::to_string(trend.window.last));
    out.records.push_back(
        {rec.region, rec.year, rec.value - trend.at(rec.year) + trend.p_max});
  }
  return out;
}

namespace detail {

template <typename PerRegion>
void for_each_region_series(const YieldPanel& panel, PerRegion&& fn) {
  std::size_t begin = 0;
  while (begin < panel.records.size()) {
    std::size_t end = begin;
    while (end < panel.records.size() &&
           panel.records[end].region == panel.records[begin].region)
      ++end;
    fn(std::span<const YieldRecord>(panel.records.data() + begin,
                                    end - begin));
    begin = end;
  }
}

}  // namespace detail

/// gap_abs(r, t) = max over the window of y_det(r, .) - y_det(r, t).
inline TargetTable yield_gap_abs(const YieldPanel& detrended,
                                 YearRange window) {
  TargetTable table;
  table.kind = TargetKind::GapAbs;
  table.window = window;
  detail::for_each_region_series(
      detrended, [&](std::span<const YieldRecord> series) {
        double region_max = -std::numeric_limits<double>::infinity();
        for (const auto& rec : series)
          if (window.contains(rec.year))
            region_max = std::max(region_max, rec.value);
        if (!std::isfinite(region_max))
          throw Error::data("EmptyRegionSeries",
                            "region " + series.front().region +
                                " has no detrended yields in the window");
        for (const auto& rec : series)
          if (window.contains(rec.year))
            table.values[{rec.region, rec.year}] = region_max - rec.value;
      });
  return table;
}

/// gap_ratio(r, t) = 100 (y_det(r, t) - mean_w) / mean_w, positive above
/// the region's window mean.
inline TargetTable yield_gap_ratio(const YieldPanel& detrended,
                                   YearRange window) {
  TargetTable table;
  table.kind = TargetKind::GapRatio;
  table.window = window;
  detail::for_each_region_series(
      detrended, [&](std::span<const YieldRecord> series) {
        double sum = 0.0;
        int count = 0;
        for (const auto& rec : series)
          if (window.contains(rec.year)) {
            sum += rec.value;
            ++count;
          }
        if (count == 0)
          throw Error::data("EmptyRegionSeries",
                            "region " + series.front().region +
                                " has no detrended yields in the window");
        const double mean = sum / count;
        if (!(mean > 0.0))
          throw Error::data("NonPositiveMean",
                            "region " + series.front().region +
                                " has non-positive mean detrended yield");
        for (const auto& rec : series)
          if (window.contains(rec.year))
            table.values[{rec.region, rec.year}] =
                100.0 * (rec.value - mean) / mean;
      });
  return table;
}

/// anomaly(r, t) = 100 (y_det(r, t) - m) / m with m the mean detrended
/// yield over the lagged rolling window t-lag-window+1 .. t-lag. Rows whose
/// window has fewer than `min_window_years` values are dropped and counted.
inline TargetTable yield_anomaly(const YieldPanel& detrended, int lag = 2,
                                 int window_years = 10,
                                 int min_window_years = 7) {
  TargetTable table;
  table.kind = TargetKind::Anomaly;
  detail::for_each_region_series(
      detrended, [&](std::span<const YieldRecord> series) {
        std::map<int, double> by_year;
        for (const auto& rec : series) by_year[rec.year] = rec.value;
        for (const auto& rec : series) {
          double sum = 0.0;
          int count = 0;
          for (int y = rec.year - lag - window_years + 1; y <= rec.year - lag;
               ++y) {
            const auto it = by_year.find(y);
            if (it != by_year.end()) {
              sum += it->second;
              ++count;
            }
          }
          if (count < min_window_years) {
            ++table.dropped_rows;
            continue;
          }
          const double m = sum / count;
          if (!(m > 0.0))
            throw Error::data("NonPositiveMean",
                              "region " + rec.region +
                                  " has non-positive rolling-mean yield");
          table.values[{rec.region, rec.year}] = 100.0 * (rec.value - m) / m;
        }
      });
  return table;
}

struct TargetConfig {
  YearRange trend_window{0, 0};  // {0,0} = use the panel's year span
  int anomaly_lag = 2;
  int anomaly_window = 10;
  int anomaly_min_window_years = 7;
};

/// Dispatcher: fit trend, detrend, then apply the kind-specific transform.
inline TargetTable build_target_table(const YieldPanel& yields,
                                      TargetKind kind,
                                      const TargetConfig& config = {}) {
  YearRange window = config.trend_window;
  if (window.first == 0 && window.last == 0) {
    const auto years = yields.years();
    if (years.empty())
      throw Error::data("InsufficientYears", "yield panel is empty");
    window = {*years.begin(), *years.rbegin()};
  }
  const QuadraticTrend trend = fit_national_trend(yields, window);
  const YieldPanel det = detrend(yields, trend);

  TargetTable table;
  switch (kind) {
    case TargetKind::Yield: {
      table.kind = TargetKind::Yield;
      for (const auto& rec : det.records)
        table.values[{rec.region, rec.year}] = rec.value;
      break;
    }
    case TargetKind::GapAbs:
      table = yield_gap_abs(det, window);
      break;
    case TargetKind::GapRatio:
      table = yield_gap_ratio(det, window);
      break;
    case TargetKind::Anomaly:
      table = yield_anomaly(det, config.anomaly_lag, config.anomaly_window,
                            config.anomaly_min_window_years);
      break;
  }
  table.trend = trend;
  table.window = window;
  return table;
}

inline void write_target_csv(const TargetTable& table,
                             const std::string& path) {
  CsvWriter writer(path);
  writer.row({"region", "year", "kind", "value"});
  for (const auto& [key, value] : table.values)
    writer.row({key.first, std::to_string(key.second),
                target_kind_name(table.kind), format_double(value)});
}

inline TargetTable load_target_csv(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next_row(fields)) reader.fail("missing header");
  if (fields != std::vector<std::string>{"region", "year", "kind", "value"})
    reader.fail("header must be region,year,kind,value");
  TargetTable table;
  bool first = true;
  while (reader.next_row(fields)) {
    if (fields.size() != 4) reader.fail("expected 4 columns");
    const TargetKind kind = parse_target_kind(fields[2]);
    if (first) {
      table.kind = kind;
      first = false;
    } else if (kind != table.kind) {
      reader.fail("mixed target kinds in one file");
    }
    table.values[{fields[0], reader.parse_int(fields[1], "year")}] =
        reader.parse_double(fields[3], "value");
  }
  if (table.values.empty()) reader.fail("no data rows");
  return table;
}

}  // namespace agroval
