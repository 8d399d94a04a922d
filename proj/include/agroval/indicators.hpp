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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agroval/dates.hpp"
#include "agroval/errors.hpp"
#include "agroval/panels.hpp"
#include "agroval/stats.hpp"

namespace agroval {

enum class PeriodKind { Weekly, Monthly, Quarterly };

inline const char* period_kind_name(PeriodKind k) {
  switch (k) {
    case PeriodKind::Weekly: return "weekly";
    case PeriodKind::Monthly: return "monthly";
    case PeriodKind::Quarterly: return "quarterly";
  }
  return "?";
}

/// (year, ordinal) period key. For weekly periods the year is the ISO
/// week-based year; for monthly/quarterly it is the calendar year.
using PeriodKey = std::pair<int, int>;

inline PeriodKey period_key(const Date& d, PeriodKind kind) {
  switch (kind) {
    case PeriodKind::Weekly: {
      const IsoWeek w = iso_week(d);
      return {w.year, w.week};
    }
    case PeriodKind::Monthly:
      return {d.year, d.month};
    case PeriodKind::Quarterly:
      return {d.year, quarter_of(d.month)};
  }
  return {0, 0};
}

inline int period_length_days(PeriodKind kind, const PeriodKey& key) {
  switch (kind) {
    case PeriodKind::Weekly:
      return 7;
    case PeriodKind::Monthly:
      return days_in_month(key.first, key.second);
    case PeriodKind::Quarterly: {
      int days = 0;
      for (int m = (key.second - 1) * 3 + 1; m <= key.second * 3; ++m)
        days += days_in_month(key.first, m);
      return days;
    }
  }
  return 0;
}

/// Values of one indicator for one region at one period kind, keyed by
/// (year, ordinal). Only complete periods are present.
struct IndicatorSeries {
  RegionId region;
  std::string indicator;
  PeriodKind period_kind = PeriodKind::Monthly;
  std::map<PeriodKey, double> values;
};

enum class AggStat { Mean, Sum, Min, Max };

inline AggStat parse_agg_stat(const std::string& name) {
  if (name == "mean") return AggStat::Mean;
  if (name == "sum") return AggStat::Sum;
  if (name == "min") return AggStat::Min;
  if (name == "max") return AggStat::Max;
  throw Error::data("UnknownIndicator", "unknown statistic '" + name + "'");
}

namespace detail {

struct PeriodAccum {
  double sum = 0.0;
  double min = 0.0;
  double max = 0.0;
  int count = 0;

  void add(double v) {
    if (count == 0) {
      min = max = v;
    } else {
      min = std::min(min, v);
      max = std::max(max, v);
    }
    sum += v;
    ++count;
  }
};

/// Buckets a contiguous daily series by period, keeping complete periods
/// only (incomplete head/tail periods are dropped).
template <typename PerDay>
std::map<PeriodKey, PeriodAccum> bucket_by_period(std::size_t n_days,
                                                  Date start, PeriodKind kind,
                                                  PerDay&& value_at) {
  if (n_days == 0) throw Error::data("EmptySeries", "no daily values");
  std::map<PeriodKey, PeriodAccum> buckets;
  Date d = start;
  for (std::size_t i = 0; i < n_days; ++i, d = add_days(d, 1))
    buckets[period_key(d, kind)].add(value_at(i));
  for (auto it = buckets.begin(); it != buckets.end();)
    if (it->second.count != period_length_days(kind, it->first))
      it = buckets.erase(it);
    else
      ++it;
  return buckets;
}

}  // namespace detail

/// Periodic aggregate of one daily variable. One value per complete period.
inline std::map<PeriodKey, double> aggregate(std::span<const double> daily,
                                             Date start, PeriodKind kind,
                                             AggStat stat) {
  const auto buckets = detail::bucket_by_period(
      daily.size(), start, kind, [&](std::size_t i) { return daily[i]; });
  std::map<PeriodKey, double> out;
  for (const auto& [key, acc] : buckets) {
    switch (stat) {
      case AggStat::Mean: out[key] = acc.sum / acc.count; break;
      case AggStat::Sum: out[key] = acc.sum; break;
      case AggStat::Min: out[key] = acc.min; break;
      case AggStat::Max: out[key] = acc.max; break;
    }
  }
  return out;
}

enum class Cmp { Less, LessEq, Greater, GreaterEq };

inline bool compare(double value, Cmp cmp, double threshold) {
  switch (cmp) {
    case Cmp::Less: return value < threshold;
    case Cmp::LessEq: return value <= threshold;
    case Cmp::Greater: return value > threshold;
    case Cmp::GreaterEq: return value >= threshold;
  }
  return false;
}

/// Days per complete period satisfying `value <cmp> threshold`.
inline std::map<PeriodKey, double> count_threshold_days(
    std::span<const double> daily, Date start, Cmp cmp, double threshold,
    PeriodKind kind) {
  const auto buckets = detail::bucket_by_period(
      daily.size(), start, kind, [&](std::size_t i) {
        return compare(daily[i], cmp, threshold) ? 1.0 : 0.0;
      });
  std::map<PeriodKey, double> out;
  for (const auto& [key, acc] : buckets) out[key] = acc.sum;
  return out;
}

/// Empirical threshold from the region's own reference days (type-7
/// quantile of all daily values in the reference calendar years).
inline double reference_quantile(std::span<const double> daily, Date start,
                                 double percentile, int ref_first_year,
                                 int ref_last_year) {
  std::vector<double> reference;
  Date d = start;
  for (std::size_t i = 0; i < daily.size(); ++i, d = add_days(d, 1))
    if (d.year >= ref_first_year && d.year <= ref_last_year)
      reference.push_back(daily[i]);
  if (reference.empty())
    throw Error::data("InsufficientReference",
                      "no daily values inside reference years " +
                          std::to_string(ref_first_year) + ".." +
                          std::to_string(ref_last_year));
  return quantile_type7(std::move(reference), percentile / 100.0);
}

enum class ThresholdSide { Above, Below };

/// Days per complete period beyond the region's empirical p-quantile.
/// "above" counts value > threshold, "below" counts value < threshold.
inline std::map<PeriodKey, double> percentile_threshold_days(
    std::span<const double> daily, Date start, double percentile,
    int ref_first_year, int ref_last_year, ThresholdSide side,
    PeriodKind kind) {
  const double threshold =
      reference_quantile(daily, start, percentile, ref_first_year,
                         ref_last_year);
  return count_threshold_days(
      daily, start,
      side == ThresholdSide::Above ? Cmp::Greater : Cmp::Less, threshold,
      kind);
}

/// Freeze-thaw (Wechselfrost) days: tmax above and tmin below 0 deg C.
inline std::map<PeriodKey, double> wechselfrost_days(
    std::span<const double> tmin, std::span<const double> tmax, Date start,
    PeriodKind kind) {
  if (tmin.size() != tmax.size())
    throw Error::data("LengthMismatch", "tmin and tmax differ in length");
  const auto buckets = detail::bucket_by_period(
      tmin.size(), start, kind, [&](std::size_t i) {
        return (tmax[i] > 0.0 && tmin[i] < 0.0) ? 1.0 : 0.0;
      });
  std::map<PeriodKey, double> out;
  for (const auto& [key, acc] : buckets) out[key] = acc.sum;
  return out;
}

/// Proxy thunderstorm (Gewitter) days: heavy precipitation coinciding with
/// wind at or above the region's reference p-quantile.
inline std::map<PeriodKey, double> gewitter_days(
    std::span<const double> precip, std::span<const double> wind, Date start,
    PeriodKind kind, double precip_min, double wind_percentile,
    int ref_first_year, int ref_last_year) {
  if (precip.size() != wind.size())
    throw Error::data("LengthMismatch", "precip and wind differ in length");
  const double wind_threshold = reference_quantile(
      wind, start, wind_percentile, ref_first_year, ref_last_year);
  const auto buckets = detail::bucket_by_period(
      precip.size(), start, kind, [&](std::size_t i) {
        return (precip[i] >= precip_min && wind[i] >= wind_threshold) ? 1.0
                                                                      : 0.0;
      });
  std::map<PeriodKey, double> out;
  for (const auto& [key, acc] : buckets) out[key] = acc.sum;
  return out;
}

}  // namespace agroval
