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
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "agroval/errors.hpp"
#include "agroval/indicators.hpp"
#include "agroval/panels.hpp"
#include "agroval/rng.hpp"

namespace agroval {

/// Links one monthly weather aggregate to yield: the yield gains
/// weight * (aggregate - center) tonnes per hectare.
struct DriverTerm {
  std::string variable;  // weather variable name (tmean, precip, ...)
  int month = 5;         // calendar month 1..12
  AggStat stat = AggStat::Mean;
  double weight = 0.0;   // t/ha per indicator unit
  double center = 0.0;   // indicator units
};

/// Per-variable weather generation: seasonal sinusoid + persistent region
/// offset + per-month synoptic anomaly + daily noise.
struct VarGenParams {
  double base = 0.0;
  double seasonal_amp = 0.0;
  double phase_doy = 105.0;  // sinusoid peaks ~91 days later
  double offset_sd = 0.0;    // per-region, constant in time
  double monthly_sd = 0.0;   // per (region, year, month)
  double daily_sd = 0.0;
};

struct SynthConfig {
  int n_regions = 40;
  int first_year = 1979;
  int last_year = 2022;
  std::uint64_t seed = 7;

  // Yield model: quadratic national trend over u = year - first_year,
  // plus a persistent region effect, the weather drivers, iid noise, and
  // an additive shift in the designated years.
  double trend_a = -0.0015;
  double trend_b = 0.12;
  double trend_c = 4.6;
  double region_effect_sd = 0.6;
  double noise_sd = 0.2;
  double validation_shift = 0.0;  // t/ha
  std::vector<int> shifted_years;
  std::vector<DriverTerm> drivers;

  VarGenParams tmean{9.0, 9.0, 105.0, 1.2, 1.4, 2.2};
  VarGenParams precip{2.2, 0.8, 105.0, 0.4, 1.1, 3.0};  // clipped at 0
  VarGenParams wind{3.5, 1.0, 350.0, 0.4, 0.4, 1.6};
  VarGenParams radiation{11.0, 9.0, 105.0, 0.8, 1.2, 3.0};
  VarGenParams rhum{77.0, -8.0, 105.0, 2.0, 2.0, 6.0};

  void validate() const {
    if (n_regions < 2)
      throw Error::data("ConfigInvalid", "n_regions must be >= 2");
    if (last_year < first_year + 14)
      throw Error::data("ConfigInvalid",
                        "year range must span >= 15 years (detrending and "
                        "rolling windows need depth)");
    if (noise_sd < 0.0)
      throw Error::data("ConfigInvalid", "noise_sd must be >= 0");
    for (const auto& d : drivers)
      if (d.month < 1 || d.month > 12)
        throw Error::data("ConfigInvalid", "driver month must be in 1..12");
  }
};

/// What the generator actually injected, for later comparison against what
/// models recovered.
struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<DriverTerm> drivers;
  std::vector<int> shifted_years;
  double validation_shift = 0.0;
};

namespace detail {

// Substream labels: var_index * 8 + purpose.
enum SynthPurpose : std::uint64_t {
  kOffset = 0,
  kMonthly = 1,
  kDaily = 2,
  kSpread = 3,
  kYield = 6,
};

inline std::uint64_t stream_label(int var_index, SynthPurpose purpose) {
  return static_cast<std::uint64_t>(var_index) * 8 + purpose;
}

inline double seasonal(const VarGenParams& p, int doy) {
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  return p.base +
         p.seasonal_amp *
             std::sin(kTwoPi * (doy - p.phase_doy) / 365.25);
}

/// One raw (unclamped) series for one region and one variable.
inline std::vector<double> gen_variable(const VarGenParams& p,
                                        std::uint64_t seed,
                                        std::uint64_t region_hash,
                                        int var_index, Date start,
                                        std::size_t n_days) {
  Rng offset_rng(
      derive_seed(seed, region_hash, stream_label(var_index, kOffset)));
  const double offset = offset_rng.normal(0.0, p.offset_sd);
  Rng monthly_rng(
      derive_seed(seed, region_hash, stream_label(var_index, kMonthly)));
  Rng daily_rng(
      derive_seed(seed, region_hash, stream_label(var_index, kDaily)));

  std::vector<double> out(n_days);
  double month_anom = 0.0;
  int current_month = -1;
  Date d = start;
  for (std::size_t i = 0; i < n_days; ++i, d = add_days(d, 1)) {
    if (d.month != current_month) {
      current_month = d.month;
      month_anom = monthly_rng.normal(0.0, p.monthly_sd);
    }
    out[i] = seasonal(p, day_of_year(d)) + offset + month_anom +
             daily_rng.normal(0.0, p.daily_sd);
  }
  return out;
}

}  // namespace detail

/// Deterministic synthetic panels: a pure function of the config. Regions
/// draw from substreams derived as seed ^ hash(region), so per-region
/// generation is order-free and parallel-safe.
inline std::tuple<WeatherPanel, YieldPanel, GroundTruth> synth_generate(
    const SynthConfig& cfg) {
  cfg.validate();

  WeatherPanel weather;
  weather.start_date = {cfg.first_year, 1, 1};
  weather.end_date = {cfg.last_year, 12, 31};
  const std::size_t n_days = weather.n_days();

  std::vector<RegionId> region_codes;
  for (int r = 1; r <= cfg.n_regions; ++r) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "DE%03d", r);
    region_codes.emplace_back(buf);
  }

  for (const auto& code : region_codes) {
    const std::uint64_t rh = fnv1a(code);
    RegionWeather rw;
    rw.region = code;

    auto& tmean = rw.values[static_cast<std::size_t>(WeatherVar::Tmean)];
    tmean = detail::gen_variable(cfg.tmean, cfg.seed, rh, 0,
                                 weather.start_date, n_days);
    auto& tmax = rw.values[static_cast<std::size_t>(WeatherVar::Tmax)];
    auto& tmin = rw.values[static_cast<std::size_t>(WeatherVar::Tmin)];
    tmax.resize(n_days);
    tmin.resize(n_days);
    Rng spread_rng(derive_seed(cfg.seed, rh,
                               detail::stream_label(0, detail::kSpread)));
    for (std::size_t i = 0; i < n_days; ++i) {
      tmax[i] = tmean[i] + 0.8 + 1.5 * std::fabs(spread_rng.normal());
      tmin[i] = tmean[i] - 0.8 - 1.5 * std::fabs(spread_rng.normal());
    }

    auto& precip = rw.values[static_cast<std::size_t>(WeatherVar::Precip)];
    precip = detail::gen_variable(cfg.precip, cfg.seed, rh, 1,
                                  weather.start_date, n_days);
    for (auto& v : precip) v = std::max(0.0, v);

    auto& wind = rw.values[static_cast<std::size_t>(WeatherVar::Wind)];
    wind = detail::gen_variable(cfg.wind, cfg.seed, rh, 2, weather.start_date,
                                n_days);
    for (auto& v : wind) v = std::max(0.0, v);

    auto& rad = rw.values[static_cast<std::size_t>(WeatherVar::Radiation)];
    rad = detail::gen_variable(cfg.radiation, cfg.seed, rh, 3,
                               weather.start_date, n_days);
    for (auto& v : rad) v = std::max(0.1, v);

    auto& rhum = rw.values[static_cast<std::size_t>(WeatherVar::Rhum)];
    rhum = detail::gen_variable(cfg.rhum, cfg.seed, rh, 4, weather.start_date,
                                n_days);
    for (auto& v : rhum) v = std::clamp(v, 5.0, 100.0);

    weather.regions.push_back(std::move(rw));
  }

  // Yield: trend + region effect + weighted drivers + noise + shift.
  YieldPanel yields;
  for (const auto& rw : weather.regions) {
    const std::uint64_t rh = fnv1a(rw.region);
    Rng yield_rng(derive_seed(cfg.seed, rh,
                              detail::stream_label(0, detail::kYield)));
    const double region_effect = yield_rng.normal(0.0, cfg.region_effect_sd);

    // Driver indicator values per year, from the generated weather itself.
    std::vector<std::map<PeriodKey, double>> driver_series;
    for (const auto& driver : cfg.drivers) {
      const auto var = [&] {
        for (int i = 0; i < kNumWeatherVars; ++i)
          if (driver.variable == kWeatherVarNames[static_cast<std::size_t>(i)])
            return static_cast<WeatherVar>(i);
        throw Error::data("ConfigInvalid",
                          "driver variable '" + driver.variable +
                              "' is not a weather variable");
      }();
      driver_series.push_back(aggregate(rw.series(var), weather.start_date,
                                        PeriodKind::Monthly, driver.stat));
    }

    for (int year = cfg.first_year; year <= cfg.last_year; ++year) {
      const double u = static_cast<double>(year - cfg.first_year);
      double y = (cfg.trend_a * u + cfg.trend_b) * u + cfg.trend_c;
      y += region_effect;
      for (std::size_t k = 0; k < cfg.drivers.size(); ++k) {
        const auto it = driver_series[k].find({year, cfg.drivers[k].month});
        if (it == driver_series[k].end())
          throw Error::data("ConfigInvalid",
                            "driver month missing from generated weather");
        y += cfg.drivers[k].weight * (it->second - cfg.drivers[k].center);
      }
      y += yield_rng.normal(0.0, cfg.noise_sd);
      if (std::find(cfg.shifted_years.begin(), cfg.shifted_years.end(),
                    year) != cfg.shifted_years.end())
        y += cfg.validation_shift;
      if (!(y > 0.0))
        throw Error::data("ConfigInvalid",
                          "config produced non-positive yield for (" +
                              rw.region + ", " + std::to_string(year) +
                              "); adjust trend/weights");
      yields.records.push_back({rw.region, year, y});
    }
  }
  std::sort(yields.records.begin(), yields.records.end());

  GroundTruth truth;
  truth.seed = cfg.seed;
  truth.drivers = cfg.drivers;
  truth.shifted_years = cfg.shifted_years;
  truth.validation_shift = cfg.validation_shift;
  return {std::move(weather), std::move(yields), std::move(truth)};
}

// --- Config / ground-truth JSON ---------------------------------------------

inline void from_json_var(const nlohmann::json& j, VarGenParams& p) {
  if (j.contains("base")) p.base = j.at("base").get<double>();
  if (j.contains("seasonal_amp"))
    p.seasonal_amp = j.at("seasonal_amp").get<double>();
  if (j.contains("phase_doy")) p.phase_doy = j.at("phase_doy").get<double>();
  if (j.contains("offset_sd")) p.offset_sd = j.at("offset_sd").get<double>();
  if (j.contains("monthly_sd")) p.monthly_sd = j.at("monthly_sd").get<double>();
  if (j.contains("daily_sd")) p.daily_sd = j.at("daily_sd").get<double>();
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  if (j.contains("n_regions")) cfg.n_regions = j.at("n_regions").get<int>();
  if (j.contains("year_range")) {
    cfg.first_year = j.at("year_range").at(0).get<int>();
    cfg.last_year = j.at("year_range").at(1).get<int>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("trend")) {
    cfg.trend_a = j.at("trend").at("a").get<double>();
    cfg.trend_b = j.at("trend").at("b").get<double>();
    cfg.trend_c = j.at("trend").at("c").get<double>();
  }
  if (j.contains("region_effect_sd"))
    cfg.region_effect_sd = j.at("region_effect_sd").get<double>();
  if (j.contains("noise_sd")) cfg.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("validation_shift"))
    cfg.validation_shift = j.at("validation_shift").get<double>();
  if (j.contains("shifted_years"))
    cfg.shifted_years = j.at("shifted_years").get<std::vector<int>>();
  if (j.contains("drivers"))
    for (const auto& d : j.at("drivers")) {
      DriverTerm term;
      term.variable = d.at("variable").get<std::string>();
      term.month = d.at("month").get<int>();
      if (d.contains("stat"))
        term.stat = parse_agg_stat(d.at("stat").get<std::string>());
      term.weight = d.at("weight").get<double>();
      if (d.contains("center")) term.center = d.at("center").get<double>();
      cfg.drivers.push_back(std::move(term));
    }
  if (j.contains("weather")) {
    const auto& w = j.at("weather");
    if (w.contains("tmean")) from_json_var(w.at("tmean"), cfg.tmean);
    if (w.contains("precip")) from_json_var(w.at("precip"), cfg.precip);
    if (w.contains("wind")) from_json_var(w.at("wind"), cfg.wind);
    if (w.contains("radiation")) from_json_var(w.at("radiation"), cfg.radiation);
    if (w.contains("rhum")) from_json_var(w.at("rhum"), cfg.rhum);
  }
  return cfg;
}

inline SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("FileNotFound", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("MalformedRow", path + ": " + e.what());
  }
  return synth_config_from_json(j);
}

inline nlohmann::json ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["seed"] = truth.seed;
  j["validation_shift"] = truth.validation_shift;
  j["shifted_years"] = truth.shifted_years;
  nlohmann::json drivers = nlohmann::json::array();
  for (const auto& d : truth.drivers)
    drivers.push_back({{"variable", d.variable},
                       {"month", d.month},
                       {"stat", d.stat == AggStat::Sum ? "sum" : "mean"},
                       {"weight", d.weight},
                       {"center", d.center}});
  j["drivers"] = std::move(drivers);
  return j;
}

}  // namespace agroval
