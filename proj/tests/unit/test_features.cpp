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

#include <filesystem>
#include <fstream>

#include "agroval/features.hpp"
#include "agroval/synth.hpp"

using namespace agroval;

namespace {

struct Fixture {
  WeatherPanel weather;
  YieldPanel yields;

  Fixture() {
    SynthConfig cfg;
    cfg.n_regions = 3;
    cfg.first_year = 1995;
    cfg.last_year = 2020;
    cfg.seed = 31;
    auto [w, y, t] = synth_generate(cfg);
    weather = std::move(w);
    yields = std::move(y);
  }
};

FeatureSpec spec_from_string(const std::string& text) {
  return feature_spec_from_json(nlohmann::json::parse(text));
}

}  // namespace

TEST_CASE("spi9 spec expands to nine monthly columns") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "spi9",
    "entries": [{"indicator": "spi", "period": "monthly", "range": [1, 9]}]
  })");
  const FeatureTable table =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  REQUIRE(table.columns ==
          std::vector<std::string>{"spi_m1", "spi_m2", "spi_m3", "spi_m4",
                                   "spi_m5", "spi_m6", "spi_m7", "spi_m8",
                                   "spi_m9"});
  // Every (region, year) is complete at scale 1.
  REQUIRE(table.rows.size() == 3 * 26);
  for (const auto& col : table.values)
    for (double v : col) REQUIRE(std::isfinite(v));
}

TEST_CASE("identical specs produce identical tables") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "tm",
    "entries": [{"indicator": "tmean", "period": "monthly",
                 "range": [3, 5], "stat": "mean"}]
  })");
  const FeatureTable a =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  const FeatureTable b =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  REQUIRE(a.columns == b.columns);
  REQUIRE(a.rows == b.rows);
  REQUIRE(a.values == b.values);
}

TEST_CASE("region mean yield column uses training cells only") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "reference",
    "entries": [{"indicator": "region_mean_yield"}]
  })");

  // Without a plan the column is not computable.
  REQUIRE_THROWS_AS(
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020}), Error);

  std::set<Cell> cells;
  for (const auto& rec : fx.yields.records) cells.insert({rec.region, rec.year});
  const SplitPlan plan =
      make_split_plan(cells, {2004, 2018}, {2000, 2020}, 0.10, 5);
  const FeatureTable table = build_feature_table(fx.weather, fx.yields, spec,
                                                 {1995, 2020}, &plan);
  REQUIRE(table.columns == std::vector<std::string>{"region_mean_yield"});

  // Hand-computed: mean detrended yield over the region's train cells.
  const auto years = fx.yields.years();
  const QuadraticTrend trend =
      fit_national_trend(fx.yields, {*years.begin(), *years.rbegin()});
  const YieldPanel det = detrend(fx.yields, trend);
  const RegionId region = fx.weather.regions.front().region;
  double sum = 0.0;
  int count = 0;
  for (const auto& rec : det.records)
    if (rec.region == region && plan.train_cells.count({rec.region, rec.year})) {
      sum += rec.value;
      ++count;
    }
  const auto row = table.row_index({region, 2001});
  REQUIRE(row.has_value());
  REQUIRE(table.values[0][*row] == Catch::Approx(sum / count).margin(1e-12));

  // The same value is replicated across the region's rows (it carries no
  // information about the specific year).
  const auto row2 = table.row_index({region, 2018});
  REQUIRE(row2.has_value());
  REQUIRE(table.values[0][*row2] == table.values[0][*row]);
}

TEST_CASE("unknown indicators are rejected") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "bogus",
    "entries": [{"indicator": "sunspots", "period": "monthly", "range": [1, 2]}]
  })");
  try {
    build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
    FAIL("expected UnknownIndicator");
  } catch (const Error& e) {
    REQUIRE(e.category() == "UnknownIndicator");
  }
}

TEST_CASE("feature tables round-trip through CSV") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "mix",
    "entries": [
      {"indicator": "tmean", "period": "monthly", "range": [4, 6], "stat": "mean"},
      {"indicator": "frost_days", "period": "monthly", "range": [1, 3]},
      {"indicator": "precip", "period": "monthly", "range": [5, 7], "stat": "sum"}
    ]
  })");
  const FeatureTable table =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  const auto path =
      (std::filesystem::temp_directory_path() / "agroval_features.csv")
          .string();
  write_feature_csv(table, path);
  const FeatureTable loaded = load_feature_csv(path);
  REQUIRE(loaded.columns == table.columns);
  REQUIRE(loaded.rows == table.rows);
  REQUIRE(loaded.values == table.values);
}

TEST_CASE("threshold overrides flow through the spec") {
  const Fixture fx;
  // An absurdly low heat threshold turns every day into a heat day.
  const FeatureSpec spec = spec_from_string(R"({
    "name": "hot",
    "entries": [{"indicator": "heat_days", "period": "monthly", "range": [7, 7]}],
    "thresholds": {"heat_tmax": -100.0}
  })");
  const FeatureTable table =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  for (double v : table.values[0]) REQUIRE(v == 31.0);
}

TEST_CASE("weekly entries use iso weeks of the harvest year") {
  const Fixture fx;
  const FeatureSpec spec = spec_from_string(R"({
    "name": "weekly",
    "entries": [{"indicator": "tmean", "period": "weekly",
                 "range": [10, 20], "stat": "mean"}]
  })");
  const FeatureTable table =
      build_feature_table(fx.weather, fx.yields, spec, {1995, 2020});
  REQUIRE(table.columns.size() == 11);
  REQUIRE(table.columns.front() == "tmean_w10");
  REQUIRE_FALSE(table.rows.empty());
}
