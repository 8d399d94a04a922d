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
#include <set>

#include "agroval/splits.hpp"

using namespace agroval;

namespace {

std::set<Cell> grid_cells(int n_regions, int first_year, int last_year) {
  std::set<Cell> cells;
  for (int r = 1; r <= n_regions; ++r)
    for (int y = first_year; y <= last_year; ++y)
      cells.insert({"R" + std::to_string(100 + r), y});
  return cells;
}

YieldPanel flat_panel(int n_regions, int first_year, int last_year,
                      double value) {
  YieldPanel panel;
  for (int r = 1; r <= n_regions; ++r)
    for (int y = first_year; y <= last_year; ++y)
      panel.records.push_back({"R" + std::to_string(100 + r), y, value});
  std::sort(panel.records.begin(), panel.records.end());
  return panel;
}

}  // namespace

TEST_CASE("fixed validation years are returned verbatim") {
  const YieldPanel panel = flat_panel(3, 2000, 2022, 7.0);
  REQUIRE(select_validation_years(panel, ValidationMode::Fixed,
                                  {2004, 2018}) ==
          std::set<int>{2004, 2018});
  REQUIRE_THROWS_AS(
      select_validation_years(panel, ValidationMode::Fixed, {1990}), Error);
}

TEST_CASE("auto validation picks the engineered extreme years") {
  YieldPanel panel = flat_panel(3, 2000, 2022, 7.0);
  for (auto& rec : panel.records) {
    if (rec.year == 2007) rec.value = 9.5;   // engineered best year
    if (rec.year == 2015) rec.value = 4.5;   // engineered worst year
  }
  REQUIRE(select_validation_years(panel, ValidationMode::Auto) ==
          std::set<int>{2007, 2015});
}

TEST_CASE("auto validation on a constant panel ties to the earliest year") {
  const YieldPanel panel = flat_panel(3, 2000, 2022, 7.0);
  REQUIRE(select_validation_years(panel, ValidationMode::Auto) ==
          std::set<int>{2000});
}

TEST_CASE("split plan counts, determinism and hygiene") {
  // 23 pool years minus 2 validation years, 10 regions: 210 pool cells.
  const auto cells = grid_cells(10, 2000, 2022);
  const std::set<int> validation = {2004, 2018};
  const SplitPlan plan =
      make_split_plan(cells, validation, {2000, 2022}, 0.10, 1);
  REQUIRE(plan.test_cells.size() == 21);  // round(0.10 * 210)
  REQUIRE(plan.train_cells.size() == 189);
  for (const auto& cell : plan.test_cells) {
    REQUIRE_FALSE(plan.train_cells.count(cell));
    REQUIRE_FALSE(validation.count(cell.second));
  }
  for (const auto& cell : plan.train_cells)
    REQUIRE_FALSE(validation.count(cell.second));

  const SplitPlan same = make_split_plan(cells, validation, {2000, 2022},
                                         0.10, 1);
  REQUIRE(same.test_cells == plan.test_cells);
  const SplitPlan other = make_split_plan(cells, validation, {2000, 2022},
                                          0.10, 2);
  REQUIRE(other.test_cells.size() == plan.test_cells.size());
  REQUIRE(other.test_cells != plan.test_cells);

  REQUIRE_THROWS_AS(
      make_split_plan(cells, validation, {2000, 2022}, 0.0, 1), Error);
  REQUIRE_THROWS_AS(
      make_split_plan({}, validation, {2000, 2022}, 0.1, 1), Error);
}

TEST_CASE("split plans survive serialization exactly") {
  const auto cells = grid_cells(5, 2000, 2022);
  const SplitPlan plan =
      make_split_plan(cells, {2004, 2018}, {2000, 2022}, 0.10, 42);
  const auto path =
      (std::filesystem::temp_directory_path() / "agroval_plan.json").string();
  save_split_plan(plan, path);
  const SplitPlan loaded = load_split_plan(path);
  REQUIRE(loaded.seed == plan.seed);
  REQUIRE(loaded.validation_years == plan.validation_years);
  REQUIRE(loaded.test_cells == plan.test_cells);
  REQUIRE(loaded.train_cells == plan.train_cells);
  REQUIRE(loaded.pool_years.first == plan.pool_years.first);
  REQUIRE(loaded.pool_years.last == plan.pool_years.last);
}

TEST_CASE("leakage check fires on corrupted plans") {
  const auto cells = grid_cells(4, 2000, 2022);
  SplitPlan plan = make_split_plan(cells, {2004}, {2000, 2022}, 0.10, 3);
  plan.train_cells.insert(*plan.test_cells.begin());
  REQUIRE_THROWS_AS(verify_split_plan(plan), Error);

  SplitPlan bad_year = make_split_plan(cells, {2004}, {2000, 2022}, 0.10, 3);
  bad_year.train_cells.insert({"R101", 2004});
  REQUIRE_THROWS_AS(verify_split_plan(bad_year), Error);
}

TEST_CASE("many seeds, no overlaps, exact test fraction") {
  const auto cells = grid_cells(6, 2000, 2022);
  const std::size_t pool = 6 * 21;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SplitPlan plan =
        make_split_plan(cells, {2004, 2018}, {2000, 2022}, 0.10, seed);
    REQUIRE(plan.test_cells.size() ==
            static_cast<std::size_t>(std::llround(0.10 * pool)));
    REQUIRE(plan.test_cells.size() + plan.train_cells.size() == pool);
  }
}

TEST_CASE("expanding window folds") {
  std::set<int> years;
  for (int y = 2000; y <= 2009; ++y) years.insert(y);

  const CvFolds folds = expanding_window_folds(years, 3);
  REQUIRE(folds.size() == 3);
  REQUIRE(folds[0].train_years.size() == 7);
  REQUIRE(folds[0].test_years == std::vector<int>{2007});
  REQUIRE(folds[1].train_years.size() == 8);
  REQUIRE(folds[1].test_years == std::vector<int>{2008});
  REQUIRE(folds[2].train_years.size() == 9);
  REQUIRE(folds[2].test_years == std::vector<int>{2009});
  for (const auto& fold : folds)
    REQUIRE(fold.train_years.back() < fold.test_years.front());

  const CvFolds single = expanding_window_folds(years, 1);
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].test_years == std::vector<int>{2009});

  std::set<int> few = {2000, 2001, 2002};
  REQUIRE_THROWS_AS(expanding_window_folds(few, 3), Error);
}
