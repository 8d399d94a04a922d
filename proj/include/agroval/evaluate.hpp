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

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agroval/errors.hpp"
#include "agroval/features.hpp"
#include "agroval/models.hpp"
#include "agroval/splits.hpp"
#include "agroval/targets.hpp"

namespace agroval {

inline double rmse(std::span<const double> observed,
                   std::span<const double> predicted) {
  if (observed.size() != predicted.size())
    throw Error::data("LengthMismatch",
                      "observed and predicted lengths differ");
  if (observed.empty()) throw Error::data("Empty", "rmse of zero rows");
  double sse = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = observed[i] - predicted[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(observed.size()));
}

/// Which mean anchors the naive-baseline sum of squares in the R^2
/// denominator: the evaluated split's own mean (standard convention) or the
/// training mean passed alongside.
enum class R2Baseline { EvalMean, TrainMean };

/// R^2 = 1 - SS_model / SS_naive_mean.
inline double r2(std::span<const double> observed,
                 std::span<const double> predicted,
                 R2Baseline baseline = R2Baseline::EvalMean,
                 double train_mean = 0.0) {
  if (observed.size() != predicted.size())
    throw Error::data("LengthMismatch",
                      "observed and predicted lengths differ");
  if (observed.size() < 2)
    throw Error::data("ZeroVariance", "r2 needs >= 2 rows");
  const double anchor =
      baseline == R2Baseline::EvalMean ? mean_of(observed) : train_mean;
  double ss_model = 0.0, ss_naive = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss_model += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
    ss_naive += (observed[i] - anchor) * (observed[i] - anchor);
  }
  if (!(ss_naive > 0.0))
    throw Error::data("ZeroVariance", "observed values have zero variance");
  return 1.0 - ss_model / ss_naive;
}

struct EvalResult {
  double r2_test = 0.0;
  double r2_validation = 0.0;
  double rmse_test = 0.0;
  double rmse_validation = 0.0;
  std::size_t n_test = 0;
  std::size_t n_validation = 0;
};

enum class ModelClass { Effective, Degrading, Underperforming };

inline const char* model_class_name(ModelClass c) {
  switch (c) {
    case ModelClass::Effective: return "effective";
    case ModelClass::Degrading: return "degrading";
    case ModelClass::Underperforming: return "underperforming";
  }
  return "?";
}

/// Underperforming: negative validation skill. Degrading: validation skill
/// present but more than `gap_threshold` below test skill. Effective
/// otherwise.
inline ModelClass classify_model(double r2_test, double r2_validation,
                                 double gap_threshold = 0.2) {
  if (r2_validation < 0.0) return ModelClass::Underperforming;
  if (r2_test - r2_validation > gap_threshold) return ModelClass::Degrading;
  return ModelClass::Effective;
}

struct JoinedRows {
  std::vector<std::size_t> feature_rows;
  std::vector<double> observed;
  std::vector<int> years;
  std::vector<Cell> cells;
};

/// Rows present in both the feature table and the target table for the
/// given cells (deterministic order: cell order).
template <typename CellRange>
JoinedRows join_cells(const FeatureTable& features, const TargetTable& targets,
                      const CellRange& cells) {
  JoinedRows out;
  for (const auto& cell : cells) {
    const auto row = features.row_index(cell);
    if (!row) continue;
    const auto it = targets.values.find(cell);
    if (it == targets.values.end()) continue;
    out.feature_rows.push_back(*row);
    out.observed.push_back(it->second);
    out.years.push_back(cell.second);
    out.cells.push_back(cell);
  }
  return out;
}

/// Scores a trained model on the plan's test cells and on every cell in the
/// validation years. Evaluated cells are checked against the train set; any
/// overlap is a hard LeakageDetected error.
inline EvalResult evaluate_experiment(
    const TreeEnsemble& model, const FeatureTable& features,
    const TargetTable& targets, const SplitPlan& plan,
    R2Baseline baseline = R2Baseline::EvalMean) {
  verify_split_plan(plan);

  // All (region, year) cells in validation years, drawn from the joined
  // feature/target universe.
  std::vector<Cell> validation_cells;
  for (const auto& cell : features.rows)
    if (plan.is_validation_year(cell.second) && targets.values.count(cell))
      validation_cells.push_back(cell);

  const auto test = join_cells(features, targets, plan.test_cells);
  const auto validation =
      join_cells(features, targets, validation_cells);
  if (test.observed.empty() || validation.observed.empty())
    throw Error::data("MissingCells",
                      "no joined rows for test or validation evaluation");
  for (const auto& cell : test.cells)
    if (plan.train_cells.count(cell))
      throw Error::run("LeakageDetected",
                       "requested evaluation on trained cell (" + cell.first +
                           ", " + std::to_string(cell.second) + ")");
  for (const auto& cell : validation.cells)
    if (plan.train_cells.count(cell) || plan.test_cells.count(cell))
      throw Error::run("LeakageDetected",
                       "validation cell overlaps train/test (" + cell.first +
                           ", " + std::to_string(cell.second) + ")");

  double train_mean = 0.0;
  if (baseline == R2Baseline::TrainMean) {
    const auto train = join_cells(features, targets, plan.train_cells);
    if (train.observed.empty())
      throw Error::data("MissingCells", "no joined train rows for baseline");
    train_mean = mean_of(train.observed);
  }

  EvalResult result;
  const auto score = [&](const JoinedRows& rows, double& r2_out,
                         double& rmse_out, std::size_t& n_out) {
    const std::vector<double> pred =
        predict(model, features.values, rows.feature_rows);
    r2_out = r2(rows.observed, pred, baseline, train_mean);
    rmse_out = rmse(rows.observed, pred);
    n_out = rows.observed.size();
  };
  score(test, result.r2_test, result.rmse_test, result.n_test);
  score(validation, result.r2_validation, result.rmse_validation,
        result.n_validation);
  return result;
}

}  // namespace agroval
