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
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "agroval/errors.hpp"
#include "agroval/panels.hpp"
#include "agroval/rng.hpp"
#include "agroval/targets.hpp"

namespace agroval {

using Cell = std::pair<RegionId, int>;

/// Deterministic three-way partition: temporally held-out validation years,
/// a seeded random test sample over the pool cells, and the remaining
/// training cells.
struct SplitPlan {
  std::set<int> validation_years;
  std::set<Cell> test_cells;
  std::set<Cell> train_cells;
  YearRange pool_years{0, 0};
  std::uint64_t seed = 0;

  bool is_validation_year(int year) const {
    return validation_years.count(year) > 0;
  }
};

/// Hard leakage check; throws on any overlap. Run on every constructed or
/// deserialized plan.
inline void verify_split_plan(const SplitPlan& plan) {
  for (const auto& cell : plan.test_cells) {
    if (plan.train_cells.count(cell))
      throw Error::run("LeakageDetected",
                       "cell (" + cell.first + ", " +
                           std::to_string(cell.second) +
                           ") is in both train and test");
    if (plan.validation_years.count(cell.second))
      throw Error::run("LeakageDetected",
                       "test cell in validation year " +
                           std::to_string(cell.second));
  }
  for (const auto& cell : plan.train_cells)
    if (plan.validation_years.count(cell.second))
      throw Error::run("LeakageDetected",
                       "train cell in validation year " +
                           std::to_string(cell.second));
}

enum class ValidationMode { Fixed, Auto };

/// Validation years: fixed list, or the argmax/argmin years of national
/// mean detrended yield (ties broken toward the earliest year).
inline std::set<int> select_validation_years(
    const YieldPanel& yields, ValidationMode mode,
    const std::vector<int>& fixed_years = {}) {
  const auto available = yields.years();
  if (mode == ValidationMode::Fixed) {
    std::set<int> out;
    for (int y : fixed_years) {
      if (!available.count(y))
        throw Error::data("YearNotInPanel",
                          "validation year " + std::to_string(y) +
                              " has no yield data");
      out.insert(y);
    }
    return out;
  }
  if (available.size() < 3)
    throw Error::data("YearNotInPanel",
                      "auto validation selection needs >= 3 years");
  const QuadraticTrend trend =
      fit_national_trend(yields, {*available.begin(), *available.rbegin()});
  const auto means = detrend(yields, trend).national_means();
  int best_year = 0, worst_year = 0;
  double best = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [year, mean] : means) {  // ascending year: first win = earliest
    if (mean > best) {
      best = mean;
      best_year = year;
    }
    if (mean < worst) {
      worst = mean;
      worst_year = year;
    }
  }
  return {best_year, worst_year};
}

/// Samples round(test_frac * |pool|) cells uniformly (seeded shuffle) into
/// the test set; everything else in the pool trains. Cells, not regions,
/// are sampled, so a region may appear in both train and test in different
/// years.
inline SplitPlan make_split_plan(const std::set<Cell>& available_cells,
                                 const std::set<int>& validation_years,
                                 YearRange pool_years, double test_frac,
                                 std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0))
    throw Error::data("ConfigInvalid", "test_frac must be in (0, 1)");
  SplitPlan plan;
  plan.validation_years = validation_years;
  plan.pool_years = pool_years;
  plan.seed = seed;

  std::vector<Cell> pool;
  for (const auto& cell : available_cells) {
    if (validation_years.count(cell.second)) continue;
    if (!pool_years.contains(cell.second)) continue;
    pool.push_back(cell);
  }
  if (pool.empty())
    throw Error::data("EmptyPool", "no cells left after removing validation years");

  // available_cells is ordered, so `pool` is sorted: the shuffle result is
  // a pure function of (cells, seed).
  Rng rng(derive_seed(seed, fnv1a("split_plan")));
  rng.shuffle(pool);
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_frac * static_cast<double>(pool.size())));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i < n_test)
      plan.test_cells.insert(pool[i]);
    else
      plan.train_cells.insert(pool[i]);
  }
  verify_split_plan(plan);
  return plan;
}

/// Expanding-window folds over an ordered set of training years: fold i
/// trains on the first (|years| - n_folds + i) years and tests on the one
/// following year, so the test blocks partition the tail.
struct CvFold {
  std::vector<int> train_years;
  std::vector<int> test_years;
};
using CvFolds = std::vector<CvFold>;

inline CvFolds expanding_window_folds(const std::set<int>& train_years,
                                      int n_folds) {
  const std::vector<int> years(train_years.begin(), train_years.end());
  if (n_folds < 1 ||
      static_cast<int>(years.size()) < n_folds + 1)
    throw Error::data("TooFewYears",
                      "need >= n_folds + 1 training years, have " +
                          std::to_string(years.size()));
  const int initial = static_cast<int>(years.size()) - n_folds;
  CvFolds folds;
  for (int i = 0; i < n_folds; ++i) {
    CvFold fold;
    fold.train_years.assign(years.begin(), years.begin() + initial + i);
    fold.test_years = {years[static_cast<std::size_t>(initial + i)]};
    folds.push_back(std::move(fold));
  }
  return folds;
}

inline nlohmann::json split_plan_to_json(const SplitPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["validation_years"] = plan.validation_years;
  j["pool_years"] = {plan.pool_years.first, plan.pool_years.last};
  auto cells_to_json = [](const std::set<Cell>& cells) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [region, year] : cells) arr.push_back({region, year});
    return arr;
  };
  j["test"] = cells_to_json(plan.test_cells);
  j["train"] = cells_to_json(plan.train_cells);
  return j;
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& y : j.at("validation_years"))
    plan.validation_years.insert(y.get<int>());
  plan.pool_years = {j.at("pool_years").at(0).get<int>(),
                     j.at("pool_years").at(1).get<int>()};
  for (const auto& cell : j.at("test"))
    plan.test_cells.insert({cell.at(0).get<RegionId>(), cell.at(1).get<int>()});
  for (const auto& cell : j.at("train"))
    plan.train_cells.insert({cell.at(0).get<RegionId>(), cell.at(1).get<int>()});
  verify_split_plan(plan);
  return plan;
}

inline void save_split_plan(const SplitPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw Error::run("FileWriteFailed", "cannot write '" + path + "'");
  out << split_plan_to_json(plan).dump(2) << '\n';
}

inline SplitPlan load_split_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("FileNotFound", "cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return split_plan_from_json(j);
}

}  // namespace agroval
