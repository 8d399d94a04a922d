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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "agroval/errors.hpp"
#include "agroval/evaluate.hpp"
#include "agroval/explain.hpp"
#include "agroval/features.hpp"
#include "agroval/models.hpp"
#include "agroval/splits.hpp"
#include "agroval/synth.hpp"
#include "agroval/targets.hpp"

namespace agroval {

struct SplitSettings {
  std::vector<int> validation_years = {2004, 2018};
  bool auto_validation = false;
  YearRange pool_years{2000, 2022};
  double test_frac = 0.1;
  int n_folds = 3;
};

/// One full run matrix: (feature spec x target kind x model kind), plus the
/// two always-on reference runs (region-mean-yield predictor per tree model).
struct ExperimentConfig {
  std::vector<FeatureSpec> feature_specs;
  std::vector<TargetKind> targets = {TargetKind::Yield};
  std::vector<ModelKind> models = {ModelKind::RandomForest, ModelKind::Gbt};
  HyperGrid grid;
  SplitSettings split;
  TargetConfig target_config;
  YearRange reference_years{0, 0};  // {0,0} = full panel span
  std::uint64_t seed = 7;
  double gap_threshold = 0.2;
  R2Baseline baseline = R2Baseline::EvalMean;
  std::string out_dir = "out";

  // Input panels: either CSV paths or an inline synthetic config.
  std::string weather_csv;
  std::string yield_csv;
  std::optional<SynthConfig> synth;
};

struct ExperimentRecord {
  std::string id;
  ModelKind model_kind = ModelKind::RandomForest;
  std::string feature_spec;
  TargetKind target_kind = TargetKind::Yield;
  bool is_reference = false;
  bool ok = true;
  std::string failure_reason;
  nlohmann::json best_params;
  nlohmann::json cv_table;
  EvalResult eval;
  ModelClass label = ModelClass::Effective;
  double hhi = 0.0;
  double top1_share = 0.0;
  std::map<std::string, double> mean_abs_phi;
  double shap_base_value = 0.0;
  std::int64_t wall_time_ms = 0;
};

inline nlohmann::json record_to_json(const ExperimentRecord& r,
                                     const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["id"] = r.id;
  j["model_kind"] = model_kind_name(r.model_kind);
  j["feature_spec"] = r.feature_spec;
  j["target_kind"] = target_kind_name(r.target_kind);
  j["is_reference"] = r.is_reference;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) {
    j["reason"] = r.failure_reason;
    j["wall_time_ms"] = r.wall_time_ms;
    return j;
  }
  j["params"] = r.best_params;
  j["cv_table"] = r.cv_table;
  j["r2_test"] = r.eval.r2_test;
  j["r2_validation"] = r.eval.r2_validation;
  j["rmse_test"] = r.eval.rmse_test;
  j["rmse_validation"] = r.eval.rmse_validation;
  j["n_test"] = r.eval.n_test;
  j["n_validation"] = r.eval.n_validation;
  j["label"] = model_class_name(r.label);
  j["hhi"] = r.hhi;
  j["top1_share"] = r.top1_share;
  j["mean_abs_phi"] = r.mean_abs_phi;
  j["shap_base_value"] = r.shap_base_value;
  j["gap_threshold"] = cfg.gap_threshold;
  j["baseline"] =
      cfg.baseline == R2Baseline::EvalMean ? "eval_mean" : "train_mean";
  j["seed"] = cfg.seed;
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  r.id = j.at("id").get<std::string>();
  r.model_kind = parse_model_kind(j.at("model_kind").get<std::string>());
  r.feature_spec = j.at("feature_spec").get<std::string>();
  r.target_kind = parse_target_kind(j.at("target_kind").get<std::string>());
  r.is_reference = j.at("is_reference").get<bool>();
  r.ok = j.at("status").get<std::string>() == "ok";
  if (!r.ok) {
    r.failure_reason = j.value("reason", "");
    return r;
  }
  r.best_params = j.at("params");
  r.cv_table = j.value("cv_table", nlohmann::json::array());
  r.eval.r2_test = j.at("r2_test").get<double>();
  r.eval.r2_validation = j.at("r2_validation").get<double>();
  r.eval.rmse_test = j.at("rmse_test").get<double>();
  r.eval.rmse_validation = j.at("rmse_validation").get<double>();
  r.eval.n_test = j.at("n_test").get<std::size_t>();
  r.eval.n_validation = j.at("n_validation").get<std::size_t>();
  const auto label = j.at("label").get<std::string>();
  r.label = label == "effective"
                ? ModelClass::Effective
                : (label == "degrading" ? ModelClass::Degrading
                                        : ModelClass::Underperforming);
  r.hhi = j.at("hhi").get<double>();
  r.top1_share = j.at("top1_share").get<double>();
  r.mean_abs_phi =
      j.at("mean_abs_phi").get<std::map<std::string, double>>();
  r.shap_base_value = j.value("shap_base_value", 0.0);
  r.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
  return r;
}

// --- Config parsing ----------------------------------------------------------

inline HyperGrid hyper_grid_from_json(const nlohmann::json& j) {
  HyperGrid grid;
  if (j.contains("n_trees")) grid.n_trees = j.at("n_trees").get<std::vector<int>>();
  if (j.contains("max_depth"))
    grid.max_depth = j.at("max_depth").get<std::vector<int>>();
  if (j.contains("min_samples_leaf"))
    grid.min_samples_leaf = j.at("min_samples_leaf").get<std::vector<int>>();
  if (j.contains("feature_subsample"))
    grid.feature_subsample =
        j.at("feature_subsample").get<std::vector<double>>();
  if (j.contains("learning_rate"))
    grid.learning_rate = j.at("learning_rate").get<std::vector<double>>();
  if (j.contains("subsample"))
    grid.subsample = j.at("subsample").get<std::vector<double>>();
  return grid;
}

/// Loads an experiment config; feature-spec paths are resolved relative to
/// the config file's directory.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("FileNotFound", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("MalformedRow", path + ": " + e.what());
  }
  const auto base_dir = std::filesystem::path(path).parent_path();

  ExperimentConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("gap_threshold"))
    cfg.gap_threshold = j.at("gap_threshold").get<double>();
  if (j.contains("baseline"))
    cfg.baseline = j.at("baseline").get<std::string>() == "train_mean"
                       ? R2Baseline::TrainMean
                       : R2Baseline::EvalMean;
  if (j.contains("reference_years"))
    cfg.reference_years = {j.at("reference_years").at(0).get<int>(),
                           j.at("reference_years").at(1).get<int>()};
  if (j.contains("feature_specs"))
    for (const auto& p : j.at("feature_specs")) {
      const auto rel = p.get<std::string>();
      const auto resolved = std::filesystem::path(rel).is_absolute()
                                ? std::filesystem::path(rel)
                                : base_dir / rel;
      cfg.feature_specs.push_back(load_feature_spec(resolved.string()));
    }
  if (j.contains("targets")) {
    cfg.targets.clear();
    for (const auto& t : j.at("targets"))
      cfg.targets.push_back(parse_target_kind(t.get<std::string>()));
  }
  if (j.contains("models")) {
    cfg.models.clear();
    for (const auto& m : j.at("models"))
      cfg.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  if (j.contains("grid")) cfg.grid = hyper_grid_from_json(j.at("grid"));
  if (j.contains("split")) {
    const auto& s = j.at("split");
    if (s.contains("validation_years")) {
      if (s.at("validation_years").is_string()) {
        cfg.split.auto_validation =
            s.at("validation_years").get<std::string>() == "auto";
      } else {
        cfg.split.validation_years =
            s.at("validation_years").get<std::vector<int>>();
      }
    }
    if (s.contains("pool_years"))
      cfg.split.pool_years = {s.at("pool_years").at(0).get<int>(),
                              s.at("pool_years").at(1).get<int>()};
    if (s.contains("test_frac"))
      cfg.split.test_frac = s.at("test_frac").get<double>();
    if (s.contains("n_folds")) cfg.split.n_folds = s.at("n_folds").get<int>();
  }
  if (j.contains("weather_csv"))
    cfg.weather_csv = (base_dir / j.at("weather_csv").get<std::string>()).string();
  if (j.contains("yield_csv"))
    cfg.yield_csv = (base_dir / j.at("yield_csv").get<std::string>()).string();
  if (j.contains("synth"))
    cfg.synth = synth_config_from_json(j.at("synth"));
  if (cfg.feature_specs.empty())
    throw Error::data("ConfigInvalid", "config lists no feature specs");
  if (cfg.targets.empty() || cfg.models.empty())
    throw Error::data("ConfigInvalid", "config lists no targets or models");
  return cfg;
}

/// The always-included reference design: one predictor, the region's mean
/// detrended training yield.
inline FeatureSpec reference_feature_spec() {
  FeatureSpec spec;
  spec.name = "reference";
  FeatureEntry entry;
  entry.indicator = kRegionMeanYield;
  spec.entries.push_back(entry);
  return spec;
}

// --- Matrix runner -----------------------------------------------------------

struct MatrixPoint {
  const FeatureSpec* spec;
  TargetKind target;
  ModelKind model;
  bool is_reference;

  std::string id() const {
    return std::string(model_kind_name(model)) + "__" + spec->name + "__" +
           target_kind_name(target);
  }
};

struct RunOutcome {
  std::vector<ExperimentRecord> records;
  int new_points = 0;
  int skipped_points = 0;
};

namespace detail {

struct SharedInputs {
  WeatherPanel weather;
  YieldPanel yields;
  YearRange reference_years{0, 0};
  std::map<TargetKind, TargetTable> targets;
  std::map<TargetKind, SplitPlan> plans;
  std::map<std::string, FeatureTable> weather_features;  // per spec name
};

inline std::set<Cell> target_cells(const TargetTable& table) {
  std::set<Cell> cells;
  for (const auto& [cell, _] : table.values) cells.insert(cell);
  return cells;
}

/// Everything shared and read-only across matrix points: panels, target
/// tables, one split plan per target kind (same seed, congruent across
/// specs), and the weather-only feature tables.
inline SharedInputs prepare_inputs(const ExperimentConfig& cfg) {
  SharedInputs shared;
  if (cfg.synth) {
    auto [w, y, truth] = synth_generate(*cfg.synth);
    shared.weather = std::move(w);
    shared.yields = std::move(y);
  } else {
    if (cfg.weather_csv.empty() || cfg.yield_csv.empty())
      throw Error::data("ConfigInvalid",
                        "config needs either synth or weather_csv/yield_csv");
    shared.weather = load_weather_csv(cfg.weather_csv);
    shared.yields = load_yield_csv(cfg.yield_csv);
  }

  shared.reference_years = cfg.reference_years;
  if (shared.reference_years.first == 0 && shared.reference_years.last == 0)
    shared.reference_years = {shared.weather.start_date.year,
                              shared.weather.end_date.year};

  std::set<int> validation_years;
  if (cfg.split.auto_validation) {
    validation_years =
        select_validation_years(shared.yields, ValidationMode::Auto);
  } else {
    validation_years = select_validation_years(
        shared.yields, ValidationMode::Fixed, cfg.split.validation_years);
  }

  for (TargetKind kind : cfg.targets) {
    shared.targets[kind] =
        build_target_table(shared.yields, kind, cfg.target_config);
    shared.plans.emplace(
        kind, make_split_plan(target_cells(shared.targets[kind]),
                              validation_years, cfg.split.pool_years,
                              cfg.split.test_frac, cfg.seed));
  }

  for (const auto& spec : cfg.feature_specs) {
    if (spec.has_region_mean_yield()) continue;  // plan-dependent, per point
    shared.weather_features.emplace(
        spec.name,
        build_feature_table(shared.weather, shared.yields, spec,
                            shared.reference_years, nullptr,
                            cfg.target_config));
  }
  return shared;
}

inline ExperimentRecord run_point(const ExperimentConfig& cfg,
                                  const SharedInputs& shared,
                                  const MatrixPoint& point) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentRecord record;
  record.id = point.id();
  record.model_kind = point.model;
  record.feature_spec = point.spec->name;
  record.target_kind = point.target;
  record.is_reference = point.is_reference;

  try {
    const TargetTable& targets = shared.targets.at(point.target);
    const SplitPlan& plan = shared.plans.at(point.target);

    FeatureTable local_features;
    const FeatureTable* features = nullptr;
    if (point.spec->has_region_mean_yield()) {
      local_features =
          build_feature_table(shared.weather, shared.yields, *point.spec,
                              shared.reference_years, &plan,
                              cfg.target_config);
      features = &local_features;
    } else {
      features = &shared.weather_features.at(point.spec->name);
    }

    // Train rows: plan train cells present in both tables.
    const auto train = join_cells(*features, targets, plan.train_cells);
    if (train.observed.empty())
      throw Error::data("MissingCells", "no joined training rows");
    std::vector<std::vector<double>> train_columns(features->columns.size());
    for (std::size_t c = 0; c < features->columns.size(); ++c) {
      train_columns[c].reserve(train.feature_rows.size());
      for (std::size_t r : train.feature_rows)
        train_columns[c].push_back(features->values[c][r]);
    }

    std::set<int> train_years(train.years.begin(), train.years.end());
    const CvFolds folds =
        expanding_window_folds(train_years, cfg.split.n_folds);
    const std::uint64_t point_seed = derive_seed(cfg.seed, fnv1a(record.id));
    const GridSearchResult search =
        grid_search(train_columns, train.observed, train.years,
                    features->columns, point.model, cfg.grid, folds,
                    point_seed);
    record.best_params = search.best.to_json(point.model);
    record.cv_table = nlohmann::json::array();
    for (const auto& cell : search.table)
      record.cv_table.push_back({{"params", cell.point.to_json(point.model)},
                                 {"mean_rmse", cell.mean_rmse}});

    const TreeEnsemble model =
        fit_with_point(train_columns, train.observed, features->columns,
                       point.model, search.best, point_seed);
    record.eval = evaluate_experiment(model, *features, targets, plan,
                                      cfg.baseline);
    record.label = classify_model(record.eval.r2_test,
                                  record.eval.r2_validation,
                                  cfg.gap_threshold);

    // SHAP on the test split (recorded choice).
    const auto test = join_cells(*features, targets, plan.test_cells);
    const ShapSummary summary =
        shap_summary(model, features->values, test.feature_rows, record.id);
    for (std::size_t c = 0; c < summary.feature_names.size(); ++c)
      record.mean_abs_phi[summary.feature_names[c]] =
          summary.mean_abs_phi[c];
    record.shap_base_value = summary.mean_base_value;
    const ConcentrationScore score = shap_concentration(summary);
    record.hhi = score.hhi;
    record.top1_share = score.top1_share;

    // Persist model and per-row attributions.
    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);
    save_model(model, (out / "models" / (record.id + ".json")).string());
    {
      CsvWriter shap_csv((out / "shap" / (record.id + ".csv")).string());
      shap_csv.row({"model_id", "region", "year", "feature", "phi",
                    "base_value"});
      std::vector<double> row(features->columns.size());
      for (std::size_t i = 0; i < test.feature_rows.size(); ++i) {
        const std::size_t r = test.feature_rows[i];
        for (std::size_t c = 0; c < features->columns.size(); ++c)
          row[c] = features->values[c][r];
        const ShapVector sv = tree_shap(model, row);
        for (std::size_t c = 0; c < features->columns.size(); ++c)
          shap_csv.row({record.id, test.cells[i].first,
                        std::to_string(test.cells[i].second),
                        features->columns[c], format_double(sv.phi[c]),
                        format_double(sv.base_value)});
      }
    }
  } catch (const Error& e) {
    record.ok = false;
    record.failure_reason = e.what();
  }
  record.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
  return record;
}

}  // namespace detail

/// Runs the full matrix. Points already recorded under the output directory
/// are skipped when `resume` is set; per-point failures are quarantined in
/// their record and do not stop the matrix.
inline RunOutcome run_matrix(const ExperimentConfig& cfg, bool resume = false,
                             int jobs = 1) {
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "records");
  fs::create_directories(out / "models");
  fs::create_directories(out / "shap");

  // The two reference runs ride along with every matrix, whatever the
  // configured model list.
  const FeatureSpec reference = reference_feature_spec();
  std::vector<MatrixPoint> points;
  for (ModelKind model : {ModelKind::RandomForest, ModelKind::Gbt})
    points.push_back({&reference, cfg.targets.front(), model, true});
  for (const auto& spec : cfg.feature_specs)
    for (TargetKind target : cfg.targets)
      for (ModelKind model : cfg.models)
        points.push_back({&spec, target, model, false});

  const detail::SharedInputs shared = detail::prepare_inputs(cfg);

  RunOutcome outcome;
  outcome.records.resize(points.size());
  std::vector<char> fresh(points.size(), 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      const auto record_path =
          out / "records" / (points[i].id() + ".json");
      if (resume && fs::exists(record_path)) {
        std::ifstream in(record_path);
        nlohmann::json j;
        in >> j;
        outcome.records[i] = record_from_json(j);
        continue;
      }
      ExperimentRecord record = detail::run_point(cfg, shared, points[i]);
      std::ofstream rec_out(record_path);
      if (!rec_out) {
        record.ok = false;
        record.failure_reason =
            "FileWriteFailed: cannot write '" + record_path.string() + "'";
      } else {
        rec_out << record_to_json(record, cfg).dump(2) << '\n';
      }
      fresh[i] = 1;
      outcome.records[i] = std::move(record);
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (char f : fresh) {
    if (f)
      ++outcome.new_points;
    else
      ++outcome.skipped_points;
  }
  return outcome;
}

// --- Report ------------------------------------------------------------------

inline std::vector<ExperimentRecord> load_records(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> paths;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<ExperimentRecord> records;
  for (const auto& p : paths) {
    std::ifstream in(p);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error::data("MalformedRow", p.string() + ": " + e.what());
    }
    records.push_back(record_from_json(j));
  }
  return records;
}

inline std::string csv_quote(const std::string& raw) {
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += '"';
  return quoted;
}

/// Emits the report bundle: scatter data, the results table, the SHAP-by-
/// class join, and a plain-text summary.
inline void report(const std::vector<ExperimentRecord>& records,
                   const std::string& out_dir) {
  if (records.empty())
    throw Error::data("NoRecords", "no experiment records to report");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "report");
  const fs::path report_dir = fs::path(out_dir) / "report";

  {
    CsvWriter scatter((report_dir / "scatter.csv").string());
    scatter.row({"experiment_id", "model_kind", "feature_spec", "target_kind",
                 "is_reference", "r2_test", "r2_validation", "label"});
    for (const auto& r : records) {
      if (!r.ok) continue;
      scatter.row({r.id, model_kind_name(r.model_kind), r.feature_spec,
                   target_kind_name(r.target_kind),
                   r.is_reference ? "1" : "0", format_double(r.eval.r2_test),
                   format_double(r.eval.r2_validation),
                   model_class_name(r.label)});
    }
  }
  {
    CsvWriter results((report_dir / "results.csv").string());
    results.row({"experiment_id", "model_kind", "feature_spec", "target_kind",
                 "r2_test", "r2_validation", "rmse_test", "rmse_validation",
                 "label", "hhi", "top1_share", "params_json"});
    for (const auto& r : records) {
      if (!r.ok) continue;
      results.row({r.id, model_kind_name(r.model_kind), r.feature_spec,
                   target_kind_name(r.target_kind),
                   format_double(r.eval.r2_test),
                   format_double(r.eval.r2_validation),
                   format_double(r.eval.rmse_test),
                   format_double(r.eval.rmse_validation),
                   model_class_name(r.label), format_double(r.hhi),
                   format_double(r.top1_share),
                   csv_quote(r.best_params.dump())});
    }
  }
  {
    CsvWriter by_class((report_dir / "shap_by_class.csv").string());
    by_class.row({"model_id", "label", "feature", "mean_abs_phi", "hhi"});
    for (const auto& r : records) {
      if (!r.ok) continue;
      for (const auto& [feature, phi] : r.mean_abs_phi)
        by_class.row({r.id, model_class_name(r.label), feature,
                      format_double(phi), format_double(r.hhi)});
    }
  }

  std::ofstream summary((report_dir / "summary.txt").string());
  if (!summary)
    throw Error::run("FileWriteFailed", "cannot write summary.txt");
  std::map<ModelClass, int> class_counts;
  std::map<ModelClass, std::pair<double, int>> class_hhi;
  std::map<ModelKind, std::pair<std::vector<double>, std::vector<double>>>
      by_kind;
  int failed = 0;
  for (const auto& r : records) {
    if (!r.ok) {
      ++failed;
      continue;
    }
    ++class_counts[r.label];
    auto& [sum, count] = class_hhi[r.label];
    sum += r.hhi;
    ++count;
    by_kind[r.model_kind].first.push_back(r.eval.r2_test);
    by_kind[r.model_kind].second.push_back(r.eval.r2_validation);
  }
  summary << "records: " << records.size() << " (" << failed << " failed)\n";
  summary << "\nmodel classes:\n";
  for (ModelClass c : {ModelClass::Effective, ModelClass::Degrading,
                       ModelClass::Underperforming}) {
    summary << "  " << model_class_name(c) << ": " << class_counts[c];
    const auto it = class_hhi.find(c);
    if (it != class_hhi.end() && it->second.second > 0)
      summary << "  (mean HHI "
              << format_double(it->second.first / it->second.second) << ")";
    summary << '\n';
  }
  summary << "\ncorrelation of r2_test vs r2_validation per model kind:\n";
  for (const auto& [kind, series] : by_kind) {
    const auto corr = pearson(series.first, series.second);
    summary << "  " << model_kind_name(kind) << ": "
            << (corr ? format_double(*corr) : std::string("n/a")) << '\n';
  }
  summary << '\n';
}

}  // namespace agroval
