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

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agroval/errors.hpp"
#include "agroval/indicators.hpp"
#include "agroval/panels.hpp"
#include "agroval/pet.hpp"
#include "agroval/splits.hpp"
#include "agroval/standardized_index.hpp"
#include "agroval/targets.hpp"

namespace agroval {

/// Tunable thresholds for the extreme-weather indicators. Table defaults
/// follow common German agro-meteorological practice and are recorded in
/// run metadata; every value can be overridden per feature spec.
struct IndicatorConfig {
  double heat_tmax = 30.0;               // deg C, tmax >= threshold
  double frost_tmin = 0.0;               // deg C, tmin < threshold
  double hot_days_percentile = 90.0;     // on tmax
  double high_radiation_mj = 25.0;       // MJ/m^2/day (2500 J/cm^2)
  double precip_percentile = 99.0;
  double wind_percentile = 99.0;
  double gewitter_precip_min = 15.0;     // mm/day
  double gewitter_wind_percentile = 95.0;
  int spi_scale = 1;                     // months
  int spei_scale = 1;                    // months
  double latitude_deg = 51.0;            // PET site parameters
  double elevation_m = 100.0;
};

struct FeatureEntry {
  std::string indicator;
  PeriodKind period = PeriodKind::Monthly;
  int range_first = 1;
  int range_last = 1;
  AggStat stat = AggStat::Mean;  // used by plain-variable aggregates
};

inline constexpr const char* kRegionMeanYield = "region_mean_yield";

struct FeatureSpec {
  std::string name;
  std::vector<FeatureEntry> entries;
  IndicatorConfig config;

  bool has_region_mean_yield() const {
    for (const auto& e : entries)
      if (e.indicator == kRegionMeanYield) return true;
    return false;
  }
};

inline PeriodKind parse_period_kind(const std::string& name) {
  if (name == "weekly") return PeriodKind::Weekly;
  if (name == "monthly") return PeriodKind::Monthly;
  if (name == "quarterly") return PeriodKind::Quarterly;
  throw Error::data("UnknownIndicator", "unknown period kind '" + name + "'");
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  FeatureSpec spec;
  spec.name = j.at("name").get<std::string>();
  for (const auto& e : j.at("entries")) {
    FeatureEntry entry;
    entry.indicator = e.at("indicator").get<std::string>();
    if (entry.indicator == kRegionMeanYield) {
      spec.entries.push_back(entry);
      continue;
    }
    entry.period = parse_period_kind(e.at("period").get<std::string>());
    entry.range_first = e.at("range").at(0).get<int>();
    entry.range_last = e.at("range").at(1).get<int>();
    if (e.contains("stat"))
      entry.stat = parse_agg_stat(e.at("stat").get<std::string>());
    spec.entries.push_back(entry);
  }
  if (spec.entries.empty())
    throw Error::data("ConfigInvalid",
                      "feature spec '" + spec.name + "' has no entries");
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    auto get = [&](const char* key, double& slot) {
      if (t.contains(key)) slot = t.at(key).get<double>();
    };
    get("heat_tmax", spec.config.heat_tmax);
    get("frost_tmin", spec.config.frost_tmin);
    get("hot_days_percentile", spec.config.hot_days_percentile);
    get("high_radiation_mj", spec.config.high_radiation_mj);
    get("precip_percentile", spec.config.precip_percentile);
    get("wind_percentile", spec.config.wind_percentile);
    get("gewitter_precip_min", spec.config.gewitter_precip_min);
    get("gewitter_wind_percentile", spec.config.gewitter_wind_percentile);
    if (t.contains("spi_scale")) spec.config.spi_scale = t.at("spi_scale").get<int>();
    if (t.contains("spei_scale"))
      spec.config.spei_scale = t.at("spei_scale").get<int>();
    get("latitude_deg", spec.config.latitude_deg);
    get("elevation_m", spec.config.elevation_m);
  }
  return spec;
}

inline FeatureSpec load_feature_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("FileNotFound", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("MalformedRow", path + ": " + e.what());
  }
  return feature_spec_from_json(j);
}

/// Dense (region, year) x feature matrix. Rows with any undefined feature
/// are dropped and counted; column order is fixed by the spec.
struct FeatureTable {
  std::string spec_name;
  std::vector<std::string> columns;
  std::vector<Cell> rows;                    // sorted (region, year)
  std::vector<std::vector<double>> values;   // column-major [col][row]
  int dropped_rows = 0;

  std::optional<std::size_t> row_index(const Cell& cell) const {
    const auto it = std::lower_bound(rows.begin(), rows.end(), cell);
    if (it == rows.end() || *it != cell) return std::nullopt;
    return static_cast<std::size_t>(it - rows.begin());
  }

  std::vector<double> row_values(std::size_t row) const {
    std::vector<double> out(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) out[c] = values[c][row];
    return out;
  }
};

namespace detail {

inline char period_letter(PeriodKind kind) {
  switch (kind) {
    case PeriodKind::Weekly: return 'w';
    case PeriodKind::Monthly: return 'm';
    case PeriodKind::Quarterly: return 'q';
  }
  return '?';
}

inline std::optional<WeatherVar> weather_var_by_name(const std::string& name) {
  for (int i = 0; i < kNumWeatherVars; ++i)
    if (name == kWeatherVarNames[static_cast<std::size_t>(i)])
      return static_cast<WeatherVar>(i);
  if (name == "rel_humidity") return WeatherVar::Rhum;
  return std::nullopt;
}

inline std::vector<double> daily_pet_series(const WeatherPanel& panel,
                                            const RegionWeather& rw,
                                            const IndicatorConfig& cfg) {
  const std::size_t n = panel.n_days();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Date d = panel.date_at(i);
    const PetDay day{rw.series(WeatherVar::Tmean)[i],
                     rw.series(WeatherVar::Tmax)[i],
                     rw.series(WeatherVar::Tmin)[i],
                     rw.series(WeatherVar::Wind)[i],
                     rw.series(WeatherVar::Radiation)[i],
                     rw.series(WeatherVar::Rhum)[i]};
    out[i] = pet_penman_monteith(day, cfg.latitude_deg, day_of_year(d),
                                 cfg.elevation_m);
  }
  return out;
}

/// Computes one entry's periodic values for one region.
inline std::map<PeriodKey, double> entry_series(const WeatherPanel& panel,
                                                const RegionWeather& rw,
                                                const FeatureEntry& entry,
                                                const IndicatorConfig& cfg,
                                                YearRange reference) {
  const Date start = panel.start_date;
  const std::string& kind = entry.indicator;
  if (const auto var = weather_var_by_name(kind))
    return aggregate(rw.series(*var), start, entry.period, entry.stat);
  if (kind == "pet")
    return aggregate(daily_pet_series(panel, rw, cfg), start, entry.period,
                     entry.stat);
  if (kind == "spi" || kind == "spei") {
    // Quarterly standardized indices accumulate over 3 months and are
    // sampled at quarter ends.
    const bool quarterly = entry.period == PeriodKind::Quarterly;
    const int scale = quarterly
                          ? 3
                          : (kind == "spi" ? cfg.spi_scale : cfg.spei_scale);
    IndicatorSeries monthly;
    monthly.region = rw.region;
    monthly.period_kind = PeriodKind::Monthly;
    if (kind == "spi") {
      monthly.indicator = "precip_sum";
      monthly.values = aggregate(rw.series(WeatherVar::Precip), start,
                                 PeriodKind::Monthly, AggStat::Sum);
    } else {
      monthly.indicator = "water_balance";
      const auto precip = aggregate(rw.series(WeatherVar::Precip), start,
                                    PeriodKind::Monthly, AggStat::Sum);
      const auto pet = aggregate(daily_pet_series(panel, rw, cfg), start,
                                 PeriodKind::Monthly, AggStat::Sum);
      for (const auto& [key, p] : precip) {
        const auto it = pet.find(key);
        if (it != pet.end()) monthly.values[key] = p - it->second;
      }
    }
    const IndicatorSeries standardized =
        kind == "spi" ? spi(monthly, scale, reference.first, reference.last)
                      : spei(monthly, scale, reference.first, reference.last);
    if (!quarterly) return standardized.values;
    std::map<PeriodKey, double> out;
    for (const auto& [key, value] : standardized.values)
      if (key.second % 3 == 0) out[{key.first, key.second / 3}] = value;
    return out;
  }
  if (kind == "frost_days")
    return count_threshold_days(rw.series(WeatherVar::Tmin), start, Cmp::Less,
                                cfg.frost_tmin, entry.period);
  if (kind == "heat_days")
    return count_threshold_days(rw.series(WeatherVar::Tmax), start,
                                Cmp::GreaterEq, cfg.heat_tmax, entry.period);
  if (kind == "hot_days_pct")
    return percentile_threshold_days(rw.series(WeatherVar::Tmax), start,
                                     cfg.hot_days_percentile, reference.first,
                                     reference.last, ThresholdSide::Above,
                                     entry.period);
  if (kind == "high_radiation_days")
    return count_threshold_days(rw.series(WeatherVar::Radiation), start,
                                Cmp::Greater, cfg.high_radiation_mj,
                                entry.period);
  if (kind == "precip_p99_days")
    return percentile_threshold_days(rw.series(WeatherVar::Precip), start,
                                     cfg.precip_percentile, reference.first,
                                     reference.last, ThresholdSide::Above,
                                     entry.period);
  if (kind == "wind_p99_days")
    return percentile_threshold_days(rw.series(WeatherVar::Wind), start,
                                     cfg.wind_percentile, reference.first,
                                     reference.last, ThresholdSide::Above,
                                     entry.period);
  if (kind == "wechselfrost_days")
    return wechselfrost_days(rw.series(WeatherVar::Tmin),
                             rw.series(WeatherVar::Tmax), start, entry.period);
  if (kind == "gewitter_days")
    return gewitter_days(rw.series(WeatherVar::Precip),
                         rw.series(WeatherVar::Wind), start, entry.period,
                         cfg.gewitter_precip_min,
                         cfg.gewitter_wind_percentile, reference.first,
                         reference.last);
  throw Error::data("UnknownIndicator",
                    "unknown indicator '" + kind + "'");
}

}  // namespace detail

/// Builds the (region, year) feature matrix for one spec. The special
/// region_mean_yield column is the mean detrended yield over the region's
/// *training* cells only, so it carries no test or validation information;
/// it therefore requires a split plan.
inline FeatureTable build_feature_table(const WeatherPanel& weather,
                                        const YieldPanel& yields,
                                        const FeatureSpec& spec,
                                        YearRange reference,
                                        const SplitPlan* plan = nullptr,
                                        const TargetConfig& target_config = {}) {
  FeatureTable table;
  table.spec_name = spec.name;

  // Column layout, fixed by the spec.
  std::vector<const FeatureEntry*> weather_entries;
  bool wants_region_mean = false;
  for (const auto& entry : spec.entries) {
    if (entry.indicator == kRegionMeanYield) {
      wants_region_mean = true;
      table.columns.emplace_back(kRegionMeanYield);
      continue;
    }
    weather_entries.push_back(&entry);
    for (int ordinal = entry.range_first; ordinal <= entry.range_last;
         ++ordinal)
      table.columns.push_back(entry.indicator + "_" +
                              detail::period_letter(entry.period) +
                              std::to_string(ordinal));
  }
  {
    std::set<std::string> seen(table.columns.begin(), table.columns.end());
    if (seen.size() != table.columns.size())
      throw Error::data("ConfigInvalid",
                        "feature spec '" + spec.name +
                            "' produces duplicate column names");
  }

  std::map<RegionId, double> region_mean;
  if (wants_region_mean) {
    if (plan == nullptr)
      throw Error::data("MissingSplitPlan",
                        "region_mean_yield needs a split plan (train cells)");
    const auto years = yields.years();
    YearRange window = target_config.trend_window;
    if (window.first == 0 && window.last == 0)
      window = {*years.begin(), *years.rbegin()};
    const YieldPanel det =
        detrend(yields, fit_national_trend(yields, window));
    std::map<RegionId, std::pair<double, int>> acc;
    for (const auto& rec : det.records)
      if (plan->train_cells.count({rec.region, rec.year})) {
        auto& [sum, count] = acc[rec.region];
        sum += rec.value;
        ++count;
      }
    for (const auto& [region, sc] : acc)
      region_mean[region] = sc.first / sc.second;
  }

  // Per region: compute each entry's periodic series, then emit rows for
  // years where every column is defined.
  for (const auto& rw : weather.regions) {
    std::vector<std::map<PeriodKey, double>> series;
    series.reserve(weather_entries.size());
    for (const auto* entry : weather_entries)
      series.push_back(
          detail::entry_series(weather, rw, *entry, spec.config, reference));

    std::set<int> candidate_years;
    if (weather_entries.empty()) {
      for (const auto& rec : yields.records)
        if (rec.region == rw.region) candidate_years.insert(rec.year);
    } else {
      for (const auto& s : series)
        for (const auto& [key, _] : s) candidate_years.insert(key.first);
    }

    for (int year : candidate_years) {
      std::vector<double> row;
      row.reserve(table.columns.size());
      bool complete = true;
      std::size_t entry_idx = 0;
      for (const auto& entry : spec.entries) {
        if (entry.indicator == kRegionMeanYield) {
          const auto it = region_mean.find(rw.region);
          if (it == region_mean.end()) {
            complete = false;
            break;
          }
          row.push_back(it->second);
          continue;
        }
        const auto& s = series[entry_idx++];
        for (int ordinal = entry.range_first;
             ordinal <= entry.range_last && complete; ++ordinal) {
          const auto it = s.find({year, ordinal});
          if (it == s.end())
            complete = false;
          else
            row.push_back(it->second);
        }
        if (!complete) break;
      }
      if (!complete) {
        ++table.dropped_rows;
        continue;
      }
      table.rows.push_back({rw.region, year});
      if (table.values.empty()) table.values.resize(table.columns.size());
      for (std::size_t c = 0; c < row.size(); ++c)
        table.values[c].push_back(row[c]);
    }
  }
  if (table.rows.empty())
    throw Error::data("NoRowsEmitted",
                      "feature spec '" + spec.name +
                          "' produced no complete rows");
  return table;
}

inline void write_feature_csv(const FeatureTable& table,
                              const std::string& path) {
  CsvWriter writer(path);
  std::vector<std::string> header = {"region", "year"};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  writer.row(header);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<std::string> fields = {table.rows[r].first,
                                       std::to_string(table.rows[r].second)};
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      fields.push_back(format_double(table.values[c][r]));
    writer.row(fields);
  }
}

inline FeatureTable load_feature_csv(const std::string& path) {
  CsvReader reader(path);
  std::vector<std::string> fields;
  if (!reader.next_row(fields)) reader.fail("missing header");
  if (fields.size() < 3 || fields[0] != "region" || fields[1] != "year")
    reader.fail("header must start with region,year");
  FeatureTable table;
  table.columns.assign(fields.begin() + 2, fields.end());
  table.values.resize(table.columns.size());
  while (reader.next_row(fields)) {
    if (fields.size() != table.columns.size() + 2)
      reader.fail("row width does not match header");
    table.rows.push_back({fields[0], reader.parse_int(fields[1], "year")});
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      table.values[c].push_back(
          reader.parse_double(fields[c + 2], table.columns[c].c_str()));
  }
  if (table.rows.empty()) reader.fail("no data rows");
  if (!std::is_sorted(table.rows.begin(), table.rows.end()))
    reader.fail("rows must be sorted by (region, year)");
  return table;
}

}  // namespace agroval
