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
#include <catch2/catch_amalgamated.hpp>

#include "agroval/panels.hpp"
#include "agroval/synth.hpp"

using namespace agroval;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_regions = 4;
  cfg.first_year = 2000;
  cfg.last_year = 2016;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("synthesis is a pure function of the config") {
  const SynthConfig cfg = small_config();
  const auto [w1, y1, t1] = synth_generate(cfg);
  const auto [w2, y2, t2] = synth_generate(cfg);
  REQUIRE(y1.records == y2.records);
  REQUIRE(w1.regions.size() == w2.regions.size());
  for (std::size_t r = 0; r < w1.regions.size(); ++r)
    for (int v = 0; v < kNumWeatherVars; ++v)
      REQUIRE(w1.regions[r].values[static_cast<std::size_t>(v)] ==
              w2.regions[r].values[static_cast<std::size_t>(v)]);

  SynthConfig other = cfg;
  other.seed = 100;
  const auto [w3, y3, t3] = synth_generate(other);
  REQUIRE(y1.records != y3.records);
}

TEST_CASE("generated panels satisfy the weather invariants") {
  const auto [weather, yields, truth] = synth_generate(small_config());
  for (const auto& rw : weather.regions) {
    const auto tmean = rw.series(WeatherVar::Tmean);
    const auto tmax = rw.series(WeatherVar::Tmax);
    const auto tmin = rw.series(WeatherVar::Tmin);
    for (std::size_t i = 0; i < weather.n_days(); ++i) {
      REQUIRE(tmin[i] <= tmean[i]);
      REQUIRE(tmean[i] <= tmax[i]);
      REQUIRE(rw.series(WeatherVar::Precip)[i] >= 0.0);
      REQUIRE(rw.series(WeatherVar::Wind)[i] >= 0.0);
      REQUIRE(rw.series(WeatherVar::Radiation)[i] >= 0.0);
      REQUIRE(rw.series(WeatherVar::Rhum)[i] >= 0.0);
      REQUIRE(rw.series(WeatherVar::Rhum)[i] <= 100.0);
    }
  }
  for (const auto& rec : yields.records) REQUIRE(rec.value > 0.0);
  REQUIRE(validate_panels(weather, yields).clean());
}

TEST_CASE("zero drivers and zero noise leave trend plus region effect") {
  SynthConfig cfg = small_config();
  cfg.noise_sd = 0.0;
  cfg.drivers = {{"tmean", 5, AggStat::Mean, 0.0, 10.0}};  // weight zero

  SECTION("without region effects the yield is bitwise the trend") {
    cfg.region_effect_sd = 0.0;
    const auto [weather, yields, truth] = synth_generate(cfg);
    for (const auto& rec : yields.records) {
      const double u = static_cast<double>(rec.year - cfg.first_year);
      REQUIRE(rec.value == (cfg.trend_a * u + cfg.trend_b) * u + cfg.trend_c);
    }
  }

  SECTION("with region effects the residual is constant per region") {
    const auto [weather, yields, truth] = synth_generate(cfg);
    for (const auto& region : yields.regions()) {
      double effect = 0.0;
      bool first = true;
      for (int year = cfg.first_year; year <= cfg.last_year; ++year) {
        const double u = static_cast<double>(year - cfg.first_year);
        const double trend = (cfg.trend_a * u + cfg.trend_b) * u + cfg.trend_c;
        const double residual = yields.value(region, year).value() - trend;
        if (first) {
          effect = residual;
          first = false;
        } else {
          REQUIRE(residual == Catch::Approx(effect).margin(1e-12));
        }
      }
    }
  }
}

TEST_CASE("validation shift moves the national mean by exactly its size") {
  SynthConfig base = small_config();
  base.drivers = {{"tmean", 5, AggStat::Mean, 0.25, 10.0},
                  {"precip", 6, AggStat::Sum, 0.01, 65.0}};
  SynthConfig shifted = base;
  shifted.validation_shift = -1.0;
  shifted.shifted_years = {2010};

  const auto [wb, yb, tb] = synth_generate(base);
  const auto [ws, ys, ts] = synth_generate(shifted);
  const double mean_base = yb.national_means().at(2010);
  const double mean_shifted = ys.national_means().at(2010);
  REQUIRE(mean_shifted - mean_base == Catch::Approx(-1.0).margin(1e-9));
  // Other years are untouched.
  REQUIRE(ys.national_means().at(2009) ==
          Catch::Approx(yb.national_means().at(2009)).margin(1e-12));
  REQUIRE(ts.shifted_years == std::vector<int>{2010});
  REQUIRE(ts.validation_shift == -1.0);
}

TEST_CASE("config validation rejects bad setups") {
  SynthConfig cfg = small_config();
  cfg.n_regions = 1;
  REQUIRE_THROWS_AS(synth_generate(cfg), Error);
  cfg = small_config();
  cfg.last_year = cfg.first_year + 5;
  REQUIRE_THROWS_AS(synth_generate(cfg), Error);
  cfg = small_config();
  cfg.noise_sd = -0.1;
  REQUIRE_THROWS_AS(synth_generate(cfg), Error);
}
