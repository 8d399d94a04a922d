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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <vector>

#include "agroval/models.hpp"
#include "agroval/rng.hpp"
#include "agroval/splits.hpp"

using namespace agroval;

namespace {

double training_sse(const Tree& tree,
                    const std::vector<std::vector<double>>& columns,
                    const std::vector<double>& y) {
  double sse = 0.0;
  std::vector<double> row(columns.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) row[c] = columns[c][i];
    const double e = y[i] - tree.predict(row);
    sse += e * e;
  }
  return sse;
}

double sse_of_split(const std::vector<double>& xs,
                    const std::vector<double>& ys, double threshold) {
  double sl = 0, sl2 = 0, sr = 0, sr2 = 0;
  double nl = 0, nr = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= threshold) {
      sl += ys[i];
      sl2 += ys[i] * ys[i];
      ++nl;
    } else {
      sr += ys[i];
      sr2 += ys[i] * ys[i];
      ++nr;
    }
  }
  double sse = 0.0;
  if (nl > 0) sse += sl2 - sl * sl / nl;
  if (nr > 0) sse += sr2 - sr * sr / nr;
  return sse;
}

/// All midpoint candidates of one feature.
std::vector<double> candidate_thresholds(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> mids;
  for (std::size_t i = 1; i < xs.size(); ++i)
    mids.push_back(0.5 * (xs[i - 1] + xs[i]));
  return mids;
}

int count_leaves(const Tree& tree, int node = 0) {
  if (tree.is_leaf(node)) return 1;
  const auto n = static_cast<std::size_t>(node);
  return count_leaves(tree, tree.left[n]) + count_leaves(tree, tree.right[n]);
}

int sum_leaf_samples(const Tree& tree, int node = 0) {
  if (tree.is_leaf(node))
    return tree.n_samples[static_cast<std::size_t>(node)];
  const auto n = static_cast<std::size_t>(node);
  return sum_leaf_samples(tree, tree.left[n]) +
         sum_leaf_samples(tree, tree.right[n]);
}

}  // namespace

TEST_CASE("constant targets give a single leaf") {
  const std::vector<std::vector<double>> columns = {{1, 2, 3, 4, 5}};
  const std::vector<double> y(5, 3.25);
  const Tree tree = fit_cart(columns, y, {6, 1, 1.0}, 0);
  REQUIRE(tree.size() == 1);
  REQUIRE(tree.is_leaf(0));
  REQUIRE(tree.value[0] == 3.25);
  REQUIRE(tree.n_samples[0] == 5);
  REQUIRE_THROWS_AS(fit_cart(columns, {}, {6, 1, 1.0}, 0), Error);
}

TEST_CASE("step data forces the straddling midpoint split") {
  const std::vector<std::vector<double>> columns = {
      {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}};
  const std::vector<double> y = {1, 1, 1, 2, 2, 2};
  const Tree tree = fit_cart(columns, y, {1, 1, 1.0}, 0);
  REQUIRE(tree.size() == 3);
  REQUIRE(tree.feature[0] == 0);
  REQUIRE(tree.threshold[0] == 0.0);  // midpoint of -0.5 and 0.5
  REQUIRE(tree.value[static_cast<std::size_t>(tree.left[0])] == 1.0);
  REQUIRE(tree.value[static_cast<std::size_t>(tree.right[0])] == 2.0);
}

TEST_CASE("depth-2 greedy SSE matches an exhaustive oracle") {
  Rng rng(17);
  std::vector<std::vector<double>> columns(2);
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    columns[0].push_back(rng.uniform(-1, 1));
    columns[1].push_back(rng.uniform(-1, 1));
    y.push_back(columns[0].back() > 0.2 ? 2.0 + columns[1].back()
                                        : -1.0 + 0.5 * columns[0].back());
  }
  const Tree tree = fit_cart(columns, y, {2, 1, 1.0}, 0);

  // Oracle: best greedy root over all features and midpoints, then best
  // greedy split inside each child, evaluated by brute force.
  double best_root = std::numeric_limits<double>::infinity();
  double best_total = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 2; ++f)
    for (double threshold : candidate_thresholds(columns[static_cast<std::size_t>(f)])) {
      const double root_sse =
          sse_of_split(columns[static_cast<std::size_t>(f)], y, threshold);
      if (root_sse >= best_root) continue;
      best_root = root_sse;
      // Children: exhaustive best split per side.
      std::vector<double> lx0, lx1, ly, rx0, rx1, ry;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (columns[static_cast<std::size_t>(f)][i] <= threshold) {
          lx0.push_back(columns[0][i]);
          lx1.push_back(columns[1][i]);
          ly.push_back(y[i]);
        } else {
          rx0.push_back(columns[0][i]);
          rx1.push_back(columns[1][i]);
          ry.push_back(y[i]);
        }
      }
      const auto best_child = [](const std::vector<double>& x0,
                                 const std::vector<double>& x1,
                                 const std::vector<double>& yy) {
        double s = 0, s2 = 0;
        for (double v : yy) {
          s += v;
          s2 += v * v;
        }
        double best = s2 - s * s / static_cast<double>(yy.size());
        for (const auto* xs : {&x0, &x1})
          for (double t : candidate_thresholds(*xs))
            best = std::min(best, sse_of_split(*xs, yy, t));
        return best;
      };
      best_total = best_child(lx0, lx1, ly) + best_child(rx0, rx1, ry);
    }
  REQUIRE(training_sse(tree, columns, y) ==
          Catch::Approx(best_total).margin(1e-9));
}

TEST_CASE("cart never beats the root-only tree in training SSE") {
  Rng rng(23);
  std::vector<std::vector<double>> columns(3);
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    for (auto& col : columns) col.push_back(rng.uniform(-1, 1));
    y.push_back(rng.normal());
  }
  double s = 0, s2 = 0;
  for (double v : y) {
    s += v;
    s2 += v * v;
  }
  const double root_sse = s2 - s * s / static_cast<double>(y.size());
  for (int depth : {1, 2, 4, 8}) {
    const Tree tree = fit_cart(columns, y, {depth, 1, 1.0}, 0);
    REQUIRE(training_sse(tree, columns, y) <= root_sse + 1e-9);
    REQUIRE(sum_leaf_samples(tree) == 60);
  }
}

TEST_CASE("min_samples_leaf is honored") {
  Rng rng(29);
  std::vector<std::vector<double>> columns(1);
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    columns[0].push_back(rng.uniform(-1, 1));
    y.push_back(rng.normal());
  }
  const Tree tree = fit_cart(columns, y, {0, 5, 1.0}, 0);
  const auto check = [&](auto&& self, int node) -> void {
    if (tree.is_leaf(node)) {
      REQUIRE(tree.n_samples[static_cast<std::size_t>(node)] >= 5);
      return;
    }
    const auto n = static_cast<std::size_t>(node);
    REQUIRE(tree.n_samples[n] ==
            tree.n_samples[static_cast<std::size_t>(tree.left[n])] +
                tree.n_samples[static_cast<std::size_t>(tree.right[n])]);
    self(self, tree.left[n]);
    self(self, tree.right[n]);
  };
  check(check, 0);
}

TEST_CASE("one-tree forest without bootstrap reduces to the cart") {
  Rng rng(31);
  std::vector<std::vector<double>> columns(2);
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    columns[0].push_back(rng.uniform(-1, 1));
    columns[1].push_back(rng.uniform(-1, 1));
    y.push_back(2.0 * columns[0].back() - columns[1].back());
  }
  ForestParams params;
  params.n_trees = 1;
  params.bootstrap = false;
  params.cart = {4, 1, 1.0};
  const TreeEnsemble forest =
      fit_random_forest(columns, y, {"a", "b"}, params, 9);
  const Tree cart = fit_cart(columns, y, params.cart, 9);
  std::vector<std::size_t> all(y.size());
  std::iota(all.begin(), all.end(), 0);
  const auto fp = predict(forest, columns, all);
  std::vector<double> row(2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t c = 0; c < 2; ++c) row[c] = columns[c][i];
    REQUIRE(fp[i] == cart.predict(row));
  }
}

TEST_CASE("forests and boosters recover a noiseless deterministic target") {
  Rng rng(37);
  std::vector<std::vector<double>> columns(3);
  std::vector<double> y;
  for (int i = 0; i < 400; ++i) {
    for (auto& col : columns) col.push_back(rng.uniform(-1, 1));
    y.push_back(3.0 * columns[0].back() +
                (columns[1].back() > 0 ? 2.0 : -1.0) +
                0.5 * columns[2].back() * columns[0].back());
  }
  const double var_y = [&] {
    double s = 0, s2 = 0;
    for (double v : y) {
      s += v;
      s2 += v * v;
    }
    return s2 / y.size() - (s / y.size()) * (s / y.size());
  }();

  ForestParams fparams;
  fparams.n_trees = 100;
  fparams.cart = {0, 1, 1.0};
  const TreeEnsemble forest =
      fit_random_forest(columns, y, {"a", "b", "c"}, fparams, 1);
  std::vector<std::size_t> all(y.size());
  std::iota(all.begin(), all.end(), 0);
  const auto fpred = predict(forest, columns, all);
  double fsse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    fsse += (y[i] - fpred[i]) * (y[i] - fpred[i]);
  REQUIRE(1.0 - fsse / (var_y * y.size()) >= 0.95);

  GbtParams gparams;
  gparams.n_stages = 100;
  gparams.cart = {4, 1, 1.0};
  gparams.learning_rate = 0.2;
  const TreeEnsemble booster = fit_gbt(columns, y, {"a", "b", "c"}, gparams, 1);
  const auto gpred = predict(booster, columns, all);
  double gsse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    gsse += (y[i] - gpred[i]) * (y[i] - gpred[i]);
  REQUIRE(1.0 - gsse / (var_y * y.size()) >= 0.95);
}

TEST_CASE("gbt stage behavior") {
  Rng rng(41);
  std::vector<std::vector<double>> columns(1);
  std::vector<double> y;
  std::set<double> seen;
  for (int i = 0; i < 30; ++i) {
    double x = rng.uniform(-1, 1);
    while (seen.count(x)) x = rng.uniform(-1, 1);
    seen.insert(x);
    columns[0].push_back(x);
    y.push_back(std::sin(3.0 * x));
  }
  std::vector<std::size_t> all(y.size());
  std::iota(all.begin(), all.end(), 0);

  SECTION("zero stages predict the base score everywhere") {
    GbtParams params;
    params.n_stages = 0;
    const TreeEnsemble model = fit_gbt(columns, y, {"x"}, params, 2);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= y.size();
    for (double p : predict(model, columns, all))
      REQUIRE(p == Catch::Approx(mean).margin(1e-12));
  }

  SECTION("one full-depth unit-rate stage interpolates distinct-x data") {
    GbtParams params;
    params.n_stages = 1;
    params.learning_rate = 1.0;
    params.cart = {0, 1, 1.0};
    const TreeEnsemble model = fit_gbt(columns, y, {"x"}, params, 2);
    const auto pred = predict(model, columns, all);
    for (std::size_t i = 0; i < y.size(); ++i)
      REQUIRE(pred[i] == Catch::Approx(y[i]).margin(1e-12));
  }

  SECTION("training RMSE never increases across 100 stages") {
    GbtParams params;
    params.n_stages = 100;
    params.cart = {2, 1, 1.0};
    params.learning_rate = 0.1;
    const TreeEnsemble model = fit_gbt(columns, y, {"x"}, params, 2);
    std::vector<double> f(y.size(), model.base_score);
    double previous = std::numeric_limits<double>::infinity();
    for (const auto& tree : model.trees) {
      std::vector<double> row(1);
      double sse = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        row[0] = columns[0][i];
        f[i] += model.learning_rate * tree.predict(row);
        sse += (y[i] - f[i]) * (y[i] - f[i]);
      }
      const double rmse_now = std::sqrt(sse / static_cast<double>(y.size()));
      REQUIRE(rmse_now <= previous + 1e-12);
      previous = rmse_now;
    }
  }
}

TEST_CASE("ensemble prediction arithmetic") {
  // Two single-leaf trees valued 1 and 3: forest mean is 2.
  Tree t1, t2;
  t1.add_node();
  t1.value[0] = 1.0;
  t1.cover[0] = 10;
  t1.n_samples[0] = 10;
  t2.add_node();
  t2.value[0] = 3.0;
  t2.cover[0] = 10;
  t2.n_samples[0] = 10;

  TreeEnsemble forest;
  forest.kind = ModelKind::RandomForest;
  forest.feature_names = {"x"};
  forest.trees = {t1, t2};
  REQUIRE(forest.predict_row(std::vector<double>{0.0}) == 2.0);

  // gbt: base 5 + 0.1 * 10 = 6.
  Tree t3;
  t3.add_node();
  t3.value[0] = 10.0;
  t3.cover[0] = 10;
  t3.n_samples[0] = 10;
  TreeEnsemble booster;
  booster.kind = ModelKind::Gbt;
  booster.feature_names = {"x"};
  booster.base_score = 5.0;
  booster.learning_rate = 0.1;
  booster.trees = {t3};
  REQUIRE(booster.predict_row(std::vector<double>{0.0}) == 6.0);

  REQUIRE_THROWS_AS(booster.predict_row(std::vector<double>{0.0, 1.0}),
                    Error);
}

TEST_CASE("forest prediction is invariant under tree order") {
  Rng rng(43);
  std::vector<std::vector<double>> columns(2);
  std::vector<double> y;
  for (int i = 0; i < 80; ++i) {
    columns[0].push_back(rng.uniform(-1, 1));
    columns[1].push_back(rng.uniform(-1, 1));
    y.push_back(columns[0].back() + rng.normal(0.0, 0.1));
  }
  ForestParams params;
  params.n_trees = 16;
  params.cart = {4, 1, 0.5};
  TreeEnsemble forest = fit_random_forest(columns, y, {"a", "b"}, params, 3);
  const double before = forest.predict_row(std::vector<double>{0.3, -0.2});
  std::reverse(forest.trees.begin(), forest.trees.end());
  const double after = forest.predict_row(std::vector<double>{0.3, -0.2});
  REQUIRE(after == Catch::Approx(before).margin(1e-12));
}

TEST_CASE("training is deterministic and models round-trip exactly") {
  Rng rng(47);
  std::vector<std::vector<double>> columns(2);
  std::vector<double> y;
  for (int i = 0; i < 120; ++i) {
    columns[0].push_back(rng.uniform(-1, 1));
    columns[1].push_back(rng.uniform(-1, 1));
    y.push_back(std::sin(columns[0].back()) + rng.normal(0.0, 0.05));
  }
  ForestParams params;
  params.n_trees = 10;
  params.cart = {5, 2, 0.5};
  const TreeEnsemble a = fit_random_forest(columns, y, {"a", "b"}, params, 11);
  const TreeEnsemble b = fit_random_forest(columns, y, {"a", "b"}, params, 11);
  REQUIRE(model_to_json(a).dump() == model_to_json(b).dump());

  const auto path =
      (std::filesystem::temp_directory_path() / "agroval_model.json").string();
  save_model(a, path);
  const TreeEnsemble loaded = load_model(path);
  Rng probe(53);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x = {probe.uniform(-1, 1), probe.uniform(-1, 1)};
    REQUIRE(loaded.predict_row(x) == a.predict_row(x));
  }
  REQUIRE(model_to_json(loaded).dump() == model_to_json(a).dump());
}

TEST_CASE("grid search picks the argmin with first-wins ties") {
  Rng rng(59);
  std::vector<std::vector<double>> columns(1);
  std::vector<double> y;
  std::vector<int> years;
  for (int year = 2000; year <= 2009; ++year)
    for (int i = 0; i < 10; ++i) {
      columns[0].push_back(rng.uniform(-1, 1));
      y.push_back(2.0 * columns[0].back() + rng.normal(0.0, 0.1));
      years.push_back(year);
    }
  std::set<int> year_set(years.begin(), years.end());
  const CvFolds folds = expanding_window_folds(year_set, 2);

  SECTION("a one-point grid returns that point") {
    HyperGrid grid;
    grid.n_trees = {20};
    grid.max_depth = {3};
    grid.min_samples_leaf = {2};
    grid.feature_subsample = {1.0};
    const GridSearchResult res =
        grid_search(columns, y, years, {"x"}, ModelKind::RandomForest, grid,
                    folds, 1);
    REQUIRE(res.table.size() == 1);
    REQUIRE(res.best.n_trees == 20);
  }

  SECTION("a clearly better point wins") {
    // Depth 0 trees (leaves only) cannot express the slope; depth 3 can.
    HyperGrid grid;
    grid.n_trees = {10};
    grid.max_depth = {3};
    grid.min_samples_leaf = {2, 90};  // 90 forces root-only trees
    grid.feature_subsample = {1.0};
    const GridSearchResult res =
        grid_search(columns, y, years, {"x"}, ModelKind::RandomForest, grid,
                    folds, 1);
    REQUIRE(res.table.size() == 2);
    REQUIRE(res.best.min_samples_leaf == 2);
    REQUIRE(res.table[0].mean_rmse < res.table[1].mean_rmse);
  }

  SECTION("exact ties go to the first point in grid order") {
    // Constant targets: every configuration scores identically.
    std::vector<double> flat(y.size(), 1.5);
    HyperGrid grid;
    grid.n_trees = {5, 10};
    grid.max_depth = {2};
    grid.min_samples_leaf = {1};
    grid.feature_subsample = {1.0};
    const GridSearchResult res =
        grid_search(columns, flat, years, {"x"}, ModelKind::RandomForest,
                    grid, folds, 1);
    REQUIRE(res.best.n_trees == 5);
  }
}
