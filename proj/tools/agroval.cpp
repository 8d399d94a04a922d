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
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agroval/agroval.hpp"

namespace {

namespace fs = std::filesystem;
using namespace agroval;

std::string default_out_root() {
  if (const char* env = std::getenv("AGROVAL_OUT")) return env;
  return "out";
}

YearRange parse_year_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error::usage("BadArgument",
                       "year range must look like 1979:2022, got '" + text +
                           "'");
  return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
}

std::vector<int> parse_year_list(const std::string& text) {
  std::vector<int> years;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    years.push_back(std::stoi(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return years;
}

int cmd_synth(const std::string& config_path, int regions,
              const std::string& years, std::uint64_t seed, bool seed_given,
              const std::string& out_dir) {
  SynthConfig cfg;
  if (!config_path.empty()) cfg = load_synth_config(config_path);
  if (regions > 0) cfg.n_regions = regions;
  if (!years.empty()) {
    const YearRange range = parse_year_range(years);
    cfg.first_year = range.first;
    cfg.last_year = range.last;
  }
  if (seed_given) cfg.seed = seed;
  const auto [weather, yields, truth] = synth_generate(cfg);
  fs::create_directories(out_dir);
  write_weather_csv(weather, (fs::path(out_dir) / "weather.csv").string());
  write_yield_csv(yields, (fs::path(out_dir) / "yield.csv").string());
  std::ofstream truth_out((fs::path(out_dir) / "ground_truth.json").string());
  truth_out << ground_truth_to_json(truth).dump(2) << '\n';
  std::cout << "wrote weather.csv, yield.csv, ground_truth.json to "
            << out_dir << "\n";
  return 0;
}

int cmd_validate(const std::string& weather_path,
                 const std::string& yield_path) {
  const WeatherPanel weather = load_weather_csv(weather_path);
  const YieldPanel yields = load_yield_csv(yield_path);
  const ValidationReport report = validate_panels(weather, yields);
  std::cout << "regions in yield but not weather: "
            << report.regions_missing_weather.size() << "\n";
  for (const auto& r : report.regions_missing_weather)
    std::cout << "  weather-missing: " << r << "\n";
  std::cout << "regions in weather but not yield: "
            << report.regions_missing_yield.size() << "\n";
  for (const auto& r : report.regions_missing_yield)
    std::cout << "  yield-missing: " << r << "\n";
  std::cout << "missing yield cell fraction: "
            << format_double(report.missing_yield_fraction) << "\n";
  std::cout << "year coverage per region:\n";
  for (const auto& [region, cov] : report.year_coverage)
    std::cout << "  " << region << ": " << std::get<0>(cov) << ".."
              << std::get<1>(cov) << " (" << std::get<2>(cov) << " records)\n";
  return 0;
}

int cmd_features(const std::string& weather_path, const std::string& yield_path,
                 const std::string& spec_path, const std::string& plan_path,
                 const std::string& reference, const std::string& out_path) {
  const WeatherPanel weather = load_weather_csv(weather_path);
  const YieldPanel yields = load_yield_csv(yield_path);
  const FeatureSpec spec = load_feature_spec(spec_path);
  YearRange ref{weather.start_date.year, weather.end_date.year};
  if (!reference.empty()) ref = parse_year_range(reference);
  SplitPlan plan;
  const SplitPlan* plan_ptr = nullptr;
  if (!plan_path.empty()) {
    plan = load_split_plan(plan_path);
    plan_ptr = &plan;
  }
  const FeatureTable table =
      build_feature_table(weather, yields, spec, ref, plan_ptr);
  if (!out_path.empty()) {
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? "."
                               : fs::path(out_path).parent_path().string());
    write_feature_csv(table, out_path);
  }
  std::cout << "feature table '" << spec.name << "': " << table.rows.size()
            << " rows x " << table.columns.size() << " columns ("
            << table.dropped_rows << " rows dropped)\n";
  return 0;
}

int cmd_targets(const std::string& yield_path, const std::string& kind_name,
                const std::string& window, const std::string& out_path,
                const std::string& trend_out) {
  const YieldPanel yields = load_yield_csv(yield_path);
  TargetConfig config;
  if (!window.empty()) config.trend_window = parse_year_range(window);
  const TargetTable table =
      build_target_table(yields, parse_target_kind(kind_name), config);
  if (!out_path.empty()) write_target_csv(table, out_path);
  if (!trend_out.empty()) {
    nlohmann::json j = {{"a", table.trend.a},
                        {"b", table.trend.b},
                        {"c", table.trend.c},
                        {"window", {table.trend.window.first,
                                    table.trend.window.last}},
                        {"p_max", table.trend.p_max}};
    std::ofstream out(trend_out);
    out << j.dump(2) << '\n';
  }
  std::cout << "target table '" << kind_name << "': " << table.values.size()
            << " rows (" << table.dropped_rows << " dropped)\n";
  return 0;
}

int cmd_split(const std::string& targets_path, const std::string& yield_path,
              const std::string& validation, const std::string& pool,
              double test_frac, std::uint64_t seed,
              const std::string& out_path) {
  const TargetTable table = load_target_csv(targets_path);
  std::set<Cell> cells;
  for (const auto& [cell, _] : table.values) cells.insert(cell);

  std::set<int> validation_years;
  if (validation == "auto") {
    if (yield_path.empty())
      throw Error::usage("BadArgument",
                         "--validation auto needs --yield for national means");
    validation_years =
        select_validation_years(load_yield_csv(yield_path),
                                ValidationMode::Auto);
  } else {
    std::set<int> available;
    for (const auto& [cell, _] : table.values) available.insert(cell.second);
    for (int y : parse_year_list(validation)) {
      if (!available.count(y))
        throw Error::data("YearNotInPanel",
                          "validation year " + std::to_string(y) +
                              " not present in targets");
      validation_years.insert(y);
    }
  }
  const SplitPlan plan = make_split_plan(cells, validation_years,
                                         parse_year_range(pool), test_frac,
                                         seed);
  save_split_plan(plan, out_path);
  std::cout << "plan: " << plan.train_cells.size() << " train, "
            << plan.test_cells.size() << " test, validation years";
  for (int y : plan.validation_years) std::cout << ' ' << y;
  std::cout << "\n";
  return 0;
}

int cmd_train(const std::string& features_path, const std::string& targets_path,
              const std::string& plan_path, const std::string& model_name,
              const std::string& grid_path, int n_folds, std::uint64_t seed,
              const std::string& out_path, const std::string& cv_out) {
  const FeatureTable features = load_feature_csv(features_path);
  const TargetTable targets = load_target_csv(targets_path);
  const SplitPlan plan = load_split_plan(plan_path);
  const ModelKind kind = parse_model_kind(model_name);

  HyperGrid grid;
  if (!grid_path.empty()) {
    std::ifstream in(grid_path);
    if (!in) throw Error::data("FileNotFound", "cannot open '" + grid_path + "'");
    nlohmann::json j;
    in >> j;
    grid = hyper_grid_from_json(j);
  }

  const auto train = join_cells(features, targets, plan.train_cells);
  if (train.observed.empty())
    throw Error::data("MissingCells", "no joined training rows");
  std::vector<std::vector<double>> columns(features.columns.size());
  for (std::size_t c = 0; c < features.columns.size(); ++c)
    for (std::size_t r : train.feature_rows)
      columns[c].push_back(features.values[c][r]);

  const std::set<int> train_years(train.years.begin(), train.years.end());
  const CvFolds folds = expanding_window_folds(train_years, n_folds);
  const GridSearchResult search =
      grid_search(columns, train.observed, train.years, features.columns,
                  kind, grid, folds, seed);
  const TreeEnsemble model = fit_with_point(
      columns, train.observed, features.columns, kind, search.best, seed);
  save_model(model, out_path);
  if (!cv_out.empty()) {
    CsvWriter cv(cv_out);
    cv.row({"params", "mean_rmse"});
    for (const auto& cell : search.table)
      cv.row({csv_quote(cell.point.to_json(kind).dump()),
              format_double(cell.mean_rmse)});
  }
  std::cout << "trained " << model_name << " on " << train.observed.size()
            << " rows; best params " << search.best.to_json(kind).dump()
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path,
                 const std::string& features_path,
                 const std::string& targets_path, const std::string& plan_path,
                 const std::string& baseline_name,
                 const std::string& out_path) {
  const TreeEnsemble model = load_model(model_path);
  const FeatureTable features = load_feature_csv(features_path);
  const TargetTable targets = load_target_csv(targets_path);
  const SplitPlan plan = load_split_plan(plan_path);
  const R2Baseline baseline = baseline_name == "train_mean"
                                  ? R2Baseline::TrainMean
                                  : R2Baseline::EvalMean;
  const EvalResult result =
      evaluate_experiment(model, features, targets, plan, baseline);
  nlohmann::json j = {{"r2_test", result.r2_test},
                      {"r2_validation", result.r2_validation},
                      {"rmse_test", result.rmse_test},
                      {"rmse_validation", result.rmse_validation},
                      {"n_test", result.n_test},
                      {"n_validation", result.n_validation},
                      {"label", model_class_name(classify_model(
                                    result.r2_test, result.r2_validation))}};
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_explain(const std::string& model_path,
                const std::string& features_path, const std::string& plan_path,
                const std::string& rows_mode, const std::string& out_path,
                const std::string& summary_out) {
  const TreeEnsemble model = load_model(model_path);
  const FeatureTable features = load_feature_csv(features_path);

  std::vector<std::size_t> row_indices;
  if (rows_mode == "all" || plan_path.empty()) {
    row_indices.resize(features.rows.size());
    std::iota(row_indices.begin(), row_indices.end(), 0);
  } else {
    const SplitPlan plan = load_split_plan(plan_path);
    for (std::size_t r = 0; r < features.rows.size(); ++r) {
      const Cell& cell = features.rows[r];
      const bool in_validation = plan.is_validation_year(cell.second);
      if (rows_mode == "test" && plan.test_cells.count(cell))
        row_indices.push_back(r);
      else if (rows_mode == "validation" && in_validation)
        row_indices.push_back(r);
    }
  }
  if (row_indices.empty())
    throw Error::data("EmptyRows", "no rows selected for explanation");

  CsvWriter out(out_path);
  out.row({"model_id", "region", "year", "feature", "phi", "base_value"});
  std::vector<double> row(features.columns.size());
  for (std::size_t r : row_indices) {
    for (std::size_t c = 0; c < features.columns.size(); ++c)
      row[c] = features.values[c][r];
    const ShapVector sv = tree_shap(model, row);
    for (std::size_t c = 0; c < features.columns.size(); ++c)
      out.row({model_path, features.rows[r].first,
               std::to_string(features.rows[r].second), features.columns[c],
               format_double(sv.phi[c]), format_double(sv.base_value)});
  }
  if (!summary_out.empty()) {
    const ShapSummary summary =
        shap_summary(model, features.values, row_indices, model_path);
    CsvWriter s(summary_out);
    s.row({"model_id", "feature", "mean_abs_phi"});
    for (std::size_t c = 0; c < summary.feature_names.size(); ++c)
      s.row({model_path, summary.feature_names[c],
             format_double(summary.mean_abs_phi[c])});
  }
  std::cout << "explained " << row_indices.size() << " rows\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            bool resume, int jobs) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  const RunOutcome outcome = run_matrix(cfg, resume, jobs);
  report(outcome.records, cfg.out_dir);
  for (const auto& r : outcome.records) {
    if (r.ok)
      std::cout << r.id << ": r2_test=" << format_double(r.eval.r2_test)
                << " r2_validation=" << format_double(r.eval.r2_validation)
                << " label=" << model_class_name(r.label) << "\n";
    else
      std::cout << r.id << ": FAILED (" << r.failure_reason << ")\n";
  }
  std::cout << outcome.new_points << " new points, " << outcome.skipped_points
            << " skipped\n";
  return 0;
}

int cmd_report(const std::string& records_dir, const std::string& out_dir) {
  const auto records = load_records(records_dir);
  report(records, out_dir);
  std::cout << "report written to " << (fs::path(out_dir) / "report").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agroval: regional yield prediction pipeline with "
               "temporal-validation diagnostics"};
  app.require_subcommand(1);

  std::string out = default_out_root();
  std::uint64_t seed = 7;

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic panels");
  std::string synth_config, synth_years;
  int synth_regions = 0;
  bool synth_seed_given = false;
  synth->add_option("--config", synth_config, "synth config JSON");
  synth->add_option("--regions", synth_regions, "number of regions");
  synth->add_option("--years", synth_years, "year range first:last");
  synth->add_option("--seed", seed, "master seed")
      ->each([&](const std::string&) { synth_seed_given = true; });
  synth->add_option("--out", out, "output directory");

  // validate
  auto* validate = app.add_subcommand("validate", "cross-check panels");
  std::string weather_path, yield_path;
  validate->add_option("--weather", weather_path, "weather CSV")->required();
  validate->add_option("--yield", yield_path, "yield CSV")->required();

  // features
  auto* features = app.add_subcommand("features", "build a feature table");
  std::string spec_path, plan_path, reference_range, features_out;
  features->add_option("--weather", weather_path, "weather CSV")->required();
  features->add_option("--yield", yield_path, "yield CSV")->required();
  features->add_option("--spec", spec_path, "feature spec JSON")->required();
  features->add_option("--plan", plan_path, "split plan JSON (for region_mean_yield)");
  features->add_option("--reference", reference_range,
                       "reference years first:last");
  features->add_option("--out", features_out, "output CSV");

  // targets
  auto* targets = app.add_subcommand("targets", "build a target table");
  std::string target_kind = "yield", trend_window, targets_out, trend_out;
  targets->add_option("--yield", yield_path, "yield CSV")->required();
  targets->add_option("--kind", target_kind,
                      "yield|gap_abs|gap_ratio|anomaly");
  targets->add_option("--window", trend_window, "trend window first:last");
  targets->add_option("--out", targets_out, "output CSV");
  targets->add_option("--trend-out", trend_out, "trend metadata JSON");

  // split
  auto* split = app.add_subcommand("split", "build a split plan");
  std::string split_targets, split_validation = "2004,2018",
              split_pool = "2000:2022", split_out = "plan.json";
  double test_frac = 0.1;
  split->add_option("--targets", split_targets, "target CSV")->required();
  split->add_option("--yield", yield_path, "yield CSV (for --validation auto)");
  split->add_option("--validation", split_validation,
                    "comma-separated years or 'auto'");
  split->add_option("--pool", split_pool, "pool years first:last");
  split->add_option("--test-frac", test_frac, "test fraction");
  split->add_option("--seed", seed, "shuffle seed");
  split->add_option("--out", split_out, "plan JSON path");

  // train
  auto* train = app.add_subcommand("train", "grid-search and fit one model");
  std::string train_features, train_targets, train_plan, train_model = "rf",
              grid_path, model_out = "model.json", cv_out;
  int n_folds = 3;
  train->add_option("--features", train_features, "feature CSV")->required();
  train->add_option("--targets", train_targets, "target CSV")->required();
  train->add_option("--plan", train_plan, "split plan JSON")->required();
  train->add_option("--model", train_model, "rf|gbt");
  train->add_option("--grid", grid_path, "hyperparameter grid JSON");
  train->add_option("--folds", n_folds, "expanding-window folds");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--out", model_out, "model JSON path");
  train->add_option("--cv-out", cv_out, "grid-search table CSV");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a saved model");
  std::string eval_model, eval_features, eval_targets, eval_plan,
      baseline = "eval_mean", eval_out;
  evaluate->add_option("--model", eval_model, "model JSON")->required();
  evaluate->add_option("--features", eval_features, "feature CSV")->required();
  evaluate->add_option("--targets", eval_targets, "target CSV")->required();
  evaluate->add_option("--plan", eval_plan, "split plan JSON")->required();
  evaluate->add_option("--baseline", baseline, "eval_mean|train_mean");
  evaluate->add_option("--out", eval_out, "result JSON path");

  // explain
  auto* explain = app.add_subcommand("explain", "SHAP values for a saved model");
  std::string explain_model, explain_features, explain_plan,
      rows_mode = "test", shap_out = "shap.csv", summary_out;
  explain->add_option("--model", explain_model, "model JSON")->required();
  explain->add_option("--features", explain_features, "feature CSV")->required();
  explain->add_option("--plan", explain_plan, "split plan JSON");
  explain->add_option("--rows", rows_mode, "test|validation|all");
  explain->add_option("--out", shap_out, "per-row SHAP CSV");
  explain->add_option("--summary-out", summary_out, "summary CSV");

  // run
  auto* run = app.add_subcommand("run", "run the full experiment matrix");
  std::string run_config;
  bool resume = false;
  int jobs = 1;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", out, "output directory override");
  run->add_flag("--resume", resume, "skip already-recorded points");
  run->add_option("--jobs", jobs, "concurrent matrix points");

  // report
  auto* report_cmd = app.add_subcommand("report", "rebuild the report bundle");
  std::string records_dir;
  report_cmd->add_option("--records", records_dir, "records directory")
      ->required();
  report_cmd->add_option("--out", out, "experiment output directory");

  bool out_given = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--out") out_given = true;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints message or help text
    return code == 0 ? 0 : 1;      // all usage errors map to exit 1
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_config, synth_regions, synth_years, seed,
                       synth_seed_given, out);
    if (validate->parsed()) return cmd_validate(weather_path, yield_path);
    if (features->parsed())
      return cmd_features(weather_path, yield_path, spec_path, plan_path,
                          reference_range, features_out);
    if (targets->parsed())
      return cmd_targets(yield_path, target_kind, trend_window, targets_out,
                          trend_out);
    if (split->parsed())
      return cmd_split(split_targets, yield_path, split_validation, split_pool,
                       test_frac, seed, split_out);
    if (train->parsed())
      return cmd_train(train_features, train_targets, train_plan, train_model,
                       grid_path, n_folds, seed, model_out, cv_out);
    if (evaluate->parsed())
      return cmd_evaluate(eval_model, eval_features, eval_targets, eval_plan,
                          baseline, eval_out);
    if (explain->parsed())
      return cmd_explain(explain_model, explain_features, explain_plan,
                         rows_mode, shap_out, summary_out);
    if (run->parsed())
      return cmd_run(run_config, out_given ? out : "", resume, jobs);
    if (report_cmd->parsed()) {
      std::string report_out = out;
      if (!out_given)
        report_out = fs::path(records_dir).parent_path().string();
      if (report_out.empty()) report_out = ".";
      return cmd_report(records_dir, report_out);
    }
  } catch (const agroval::Error& e) {
    std::cerr << e.what() << "\n";
    switch (e.error_class()) {
      case agroval::ErrorClass::Usage: return 1;
      case agroval::ErrorClass::Data: return 2;
      case agroval::ErrorClass::Run: return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "RunError: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
