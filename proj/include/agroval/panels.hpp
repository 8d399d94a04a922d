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
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "agroval/csv.hpp"
#include "agroval/dates.hpp"
#include "agroval/errors.hpp"

namespace agroval {

using RegionId = std::string;

enum class WeatherVar : int {
  Tmean = 0,
  Tmax,
  Tmin,
  Precip,
  Wind,
  Radiation,
  Rhum,
};
inline constexpr int kNumWeatherVars = 7;
inline constexpr std::array<const char*, kNumWeatherVars> kWeatherVarNames = {
    "tmean", "tmax", "tmin", "precip", "wind", "radiation", "rhum"};

/// One region's daily series; vectors are indexed by day offset from the
/// panel start date and all have identical length.
struct RegionWeather {
  RegionId region;
  std::array<std::vector<double>, kNumWeatherVars> values;

  std::span<const double> series(WeatherVar v) const {
    return values[static_cast<std::size_t>(v)];
  }
};

/// Daily weather for a set of regions over one shared contiguous date range.
/// Immutable after construction; safe to share across threads.
struct WeatherPanel {
  Date start_date;
  Date end_date;  // inclusive
  std::vector<RegionWeather> regions;  // sorted by region code

  std::size_t n_days() const {
    return static_cast<std::size_t>(to_serial(end_date) -
                                    to_serial(start_date)) +
           1;
  }

  Date date_at(std::size_t day_index) const {
    return add_days(start_date, static_cast<std::int64_t>(day_index));
  }

  const RegionWeather* find(const RegionId& region) const {
    const auto it = std::lower_bound(
        regions.begin(), regions.end(), region,
        [](const RegionWeather& rw, const RegionId& r) { return rw.region < r; });
    if (it == regions.end() || it->region != region) return nullptr;
    return &*it;
  }
};

struct YieldRecord {
  RegionId region;
  int year;
  double value;  // t/ha

  auto operator<=>(const YieldRecord&) const = default;
};

/// Annual winter wheat yields in t/ha; missing (region, year) cells are
/// allowed and simply absent.
struct YieldPanel {
  std::vector<YieldRecord> records;  // sorted by (region, year)

  std::optional<double> value(const RegionId& region, int year) const {
    const auto it = std::lower_bound(
        records.begin(), records.end(), std::pair(region, year),
        [](const YieldRecord& rec, const std::pair<RegionId, int>& key) {
          return std::tie(rec.region, rec.year) < std::tie(key.first, key.second);
        });
    if (it == records.end() || it->region != region || it->year != year)
      return std::nullopt;
    return it->value;
  }

  std::vector<RegionId> regions() const {
    std::vector<RegionId> out;
    for (const auto& rec : records)
      if (out.empty() || out.back() != rec.region) out.push_back(rec.region);
    return out;
  }

  std::set<int> years() const {
    std::set<int> out;
    for (const auto& rec : records) out.insert(rec.year);
    return out;
  }

  /// Unweighted mean across regions for each year with any data.
  std::map<int, double> national_means() const {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& rec : records) {
      auto& [sum, count] = acc[rec.year];
      sum += rec.value;
      ++count;
    }
    std::map<int, double> out;
    for (const auto& [year, sc] : acc) out[year] = sc.first / sc.second;
    return out;
  }
};

namespace detail {

inline void check_weather_row(const std::string& region, const Date& date,
                              const std::array<double, kNumWeatherVars>& v,
                              const std::string& context) {
  const auto at = [&](WeatherVar w) {
    return v[static_cast<std::size_t>(w)];
  };
  const auto violation = [&](const std::string& what) {
    throw Error::data("InvariantViolation",
                      context + " (" + region + ", " + format_date(date) +
                          "): " + what);
  };
  if (!(at(WeatherVar::Tmin) <= at(WeatherVar::Tmean) &&
        at(WeatherVar::Tmean) <= at(WeatherVar::Tmax)))
    violation("requires tmin <= tmean <= tmax");
  if (at(WeatherVar::Precip) < 0.0) violation("precip must be >= 0");
  if (at(WeatherVar::Wind) < 0.0) violation("wind must be >= 0");
  if (at(WeatherVar::Radiation) < 0.0) violation("radiation must be >= 0");
  if (at(WeatherVar::Rhum) < 0.0 || at(WeatherVar::Rhum) > 100.0)
    violation("rel_humidity must be in [0, 100]");
}

}  // namespace detail

/// Wire schema: region,date,tmean,tmax,tmin,precip,wind,radiation,rhum.
/// Per region the dates must be contiguous and ascending; all regions must
/// share the same date range.
inline WeatherPanel load_weather_csv(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next_row(fields)) reader.fail("missing header");
  const std::vector<std::string> expected = {
      "region", "date",  "tmean",     "tmax", "tmin",
      "precip", "wind", "radiation", "rhum"};
  if (fields != expected)
    reader.fail(
        "header must be region,date,tmean,tmax,tmin,precip,wind,radiation,rhum");

  struct Accum {
    Date start{};
    Date last{};
    std::array<std::vector<double>, kNumWeatherVars> values;
  };
  std::map<RegionId, Accum> by_region;

  while (reader.next_row(fields)) {
    if (fields.size() != 9) reader.fail("expected 9 columns");
    const RegionId& region = fields[0];
    if (region.empty()) reader.fail("empty region code");
    Date date;
    if (!parse_date(fields[1], date))
      reader.fail("bad date '" + fields[1] + "' (want YYYY-MM-DD)");
    std::array<double, kNumWeatherVars> row{};
    for (int i = 0; i < kNumWeatherVars; ++i)
      row[static_cast<std::size_t>(i)] =
          reader.parse_double(fields[static_cast<std::size_t>(i + 2)],
                              kWeatherVarNames[static_cast<std::size_t>(i)]);
    detail::check_weather_row(
        region, date, row, path + ":" + std::to_string(reader.line_number()));

    auto [it, inserted] = by_region.try_emplace(region);
    Accum& acc = it->second;
    if (inserted) {
      acc.start = date;
    } else {
      const std::int64_t gap_len = to_serial(date) - to_serial(acc.last);
      if (gap_len <= 0)
        reader.fail("dates for region " + region +
                    " must be strictly ascending");
      if (gap_len > 1)
        throw Error::data("DateGap",
                          "region " + region + " is missing " +
                              format_date(add_days(acc.last, 1)));
    }
    acc.last = date;
    for (int i = 0; i < kNumWeatherVars; ++i)
      acc.values[static_cast<std::size_t>(i)].push_back(
          row[static_cast<std::size_t>(i)]);
  }
  if (by_region.empty()) throw Error::data("MalformedRow", path + ": no data rows");

  WeatherPanel panel;
  panel.start_date = by_region.begin()->second.start;
  panel.end_date = by_region.begin()->second.last;
  for (auto& [region, acc] : by_region) {
    if (acc.start != panel.start_date || acc.last != panel.end_date)
      throw Error::data("InvariantViolation",
                        "region " + region +
                            " does not cover the shared date range " +
                            format_date(panel.start_date) + ".." +
                            format_date(panel.end_date));
    RegionWeather rw;
    rw.region = region;
    rw.values = std::move(acc.values);
    panel.regions.push_back(std::move(rw));
  }
  return panel;
}

inline void write_weather_csv(const WeatherPanel& panel,
                              const std::string& path) {
  CsvWriter writer(path);
  writer.row({"region", "date", "tmean", "tmax", "tmin", "precip", "wind",
              "radiation", "rhum"});
  const std::size_t n = panel.n_days();
  for (const auto& rw : panel.regions) {
    for (std::size_t d = 0; d < n; ++d) {
      std::vector<std::string> fields = {rw.region,
                                         format_date(panel.date_at(d))};
      for (int v = 0; v < kNumWeatherVars; ++v)
        fields.push_back(
            format_double(rw.values[static_cast<std::size_t>(v)][d]));
      writer.row(fields);
    }
  }
}

/// Wire schema: region,year,yield_t_ha (native) or region,year,yield_kg_ha
/// (converted to t/ha on load).
inline YieldPanel load_yield_csv(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next_row(fields)) reader.fail("missing header");
  double unit_scale = 1.0;
  if (fields == std::vector<std::string>{"region", "year", "yield_t_ha"}) {
    unit_scale = 1.0;
  } else if (fields ==
             std::vector<std::string>{"region", "year", "yield_kg_ha"}) {
    unit_scale = 1e-3;
  } else {
    reader.fail("header must be region,year,yield_t_ha or region,year,yield_kg_ha");
  }

  YieldPanel panel;
  while (reader.next_row(fields)) {
    if (fields.size() != 3) reader.fail("expected 3 columns");
    if (fields[0].empty()) reader.fail("empty region code");
    YieldRecord rec;
    rec.region = fields[0];
    rec.year = reader.parse_int(fields[1], "year");
    rec.value = reader.parse_double(fields[2], "yield") * unit_scale;
    if (rec.value <= 0.0)
      throw Error::data("NonPositiveYield",
                        path + ":" + std::to_string(reader.line_number()) +
                            ": yield must be > 0 for (" + rec.region + ", " +
                            fields[1] + ")");
    panel.records.push_back(std::move(rec));
  }
  std::sort(panel.records.begin(), panel.records.end());
  for (std::size_t i = 1; i < panel.records.size(); ++i) {
    const auto& a = panel.records[i - 1];
    const auto& b = panel.records[i];
    if (a.region == b.region && a.year == b.year)
      throw Error::data("DuplicateRecord",
                        "duplicate yield record for (" + a.region + ", " +
                            std::to_string(a.year) + ")");
  }
  return panel;
}

inline void write_yield_csv(const YieldPanel& panel, const std::string& path) {
  CsvWriter writer(path);
  writer.row({"region", "year", "yield_t_ha"});
  for (const auto& rec : panel.records)
    writer.row({rec.region, std::to_string(rec.year),
                format_double(rec.value)});
}

/// Report-only cross-check of the two panels; never throws on mismatches.
struct ValidationReport {
  std::vector<RegionId> regions_missing_weather;  // in yield, not weather
  std::vector<RegionId> regions_missing_yield;    // in weather, not yield
  // Per yield region: [first_year, last_year] and number of records.
  std::map<RegionId, std::tuple<int, int, int>> year_coverage;
  double missing_yield_fraction = 0.0;

  bool clean() const {
    return regions_missing_weather.empty() && regions_missing_yield.empty();
  }
};

inline ValidationReport validate_panels(const WeatherPanel& weather,
                                        const YieldPanel& yields) {
  ValidationReport report;
  std::set<RegionId> weather_regions;
  for (const auto& rw : weather.regions) weather_regions.insert(rw.region);
  const auto yield_regions = yields.regions();
  for (const auto& r : yield_regions)
    if (!weather_regions.count(r)) report.regions_missing_weather.push_back(r);
  for (const auto& r : weather_regions)
    if (!std::binary_search(yield_regions.begin(), yield_regions.end(), r))
      report.regions_missing_yield.push_back(r);

  int min_year = 0, max_year = 0;
  bool first = true;
  for (const auto& rec : yields.records) {
    auto [it, inserted] = report.year_coverage.try_emplace(
        rec.region, std::tuple(rec.year, rec.year, 0));
    auto& [lo, hi, count] = it->second;
    if (inserted) {
      lo = hi = rec.year;
    } else {
      lo = std::min(lo, rec.year);
      hi = std::max(hi, rec.year);
    }
    ++count;
    if (first) {
      min_year = max_year = rec.year;
      first = false;
    } else {
      min_year = std::min(min_year, rec.year);
      max_year = std::max(max_year, rec.year);
    }
  }
  if (!yields.records.empty()) {
    const double cells = static_cast<double>(yield_regions.size()) *
                         static_cast<double>(max_year - min_year + 1);
    report.missing_yield_fraction =
        1.0 - static_cast<double>(yields.records.size()) / cells;
  }
  return report;
}

}  // namespace agroval
