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

#include <cmath>
#include <vector>

#include "agroval/explain.hpp"
#include "agroval/models.hpp"
#include "agroval/rng.hpp"

using namespace agroval;

namespace {

/// Random binary tree with consistent cover weights: each internal node
/// divides its cover across the children.
Tree random_tree(Rng& rng, int n_features, int max_depth) {
  Tree tree;
  const auto grow = [&](auto&& self, int depth, double cover) -> int {
    const int node = tree.add_node();
    tree.cover[static_cast<std::size_t>(node)] = cover;
    tree.n_samples[static_cast<std::size_t>(node)] =
        static_cast<int>(cover);
    if (depth >= max_depth || rng.uniform() < 0.2) {
      tree.value[static_cast<std::size_t>(node)] = rng.uniform(-5.0, 5.0);
      return node;
    }
    tree.feature[static_cast<std::size_t>(node)] =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(n_features)));
    tree.threshold[static_cast<std::size_t>(node)] = rng.uniform(-1.0, 1.0);
    const double left_share = rng.uniform(0.1, 0.9);
    const int left = self(self, depth + 1, cover * left_share);
    const int right = self(self, depth + 1, cover * (1.0 - left_share));
    tree.left[static_cast<std::size_t>(node)] = left;
    tree.right[static_cast<std::size_t>(node)] = right;
    return node;
  };
  grow(grow, 0, 256.0);
  return tree;
}

std::vector<double> random_row(Rng& rng, int n_features) {
  std::vector<double> x(static_cast<std::size_t>(n_features));
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

TreeEnsemble wrap_forest(std::vector<Tree> trees, int n_features) {
  TreeEnsemble model;
  model.kind = ModelKind::RandomForest;
  for (int f = 0; f < n_features; ++f)
    model.feature_names.push_back("f" + std::to_string(f));
  model.trees = std::move(trees);
  return model;
}

}  // namespace

TEST_CASE("single-player game: phi equals f(x) minus the base") {
  Rng rng(3);
  for (int round = 0; round < 20; ++round) {
    const Tree tree = random_tree(rng, 1, 3);
    const auto x = random_row(rng, 1);
    const ShapVector sv = brute_force_shap(tree, x, 1);
    REQUIRE(sv.phi[0] ==
            Catch::Approx(tree.predict(x) - sv.base_value).margin(1e-12));
  }
}

TEST_CASE("exchangeable features get equal attributions") {
  // Symmetric depth-2 tree: swapping features 0 and 1 leaves the function
  // unchanged, so at x0 == x1 their Shapley values must agree.
  Tree tree;
  for (int i = 0; i < 7; ++i) tree.add_node();
  tree.feature[0] = 0;
  tree.threshold[0] = 0.0;
  tree.left[0] = 1;
  tree.right[0] = 2;
  tree.feature[1] = 1;
  tree.threshold[1] = 0.0;
  tree.left[1] = 3;
  tree.right[1] = 4;
  tree.feature[2] = 1;
  tree.threshold[2] = 0.0;
  tree.left[2] = 5;
  tree.right[2] = 6;
  tree.cover = {16, 8, 8, 4, 4, 4, 4};
  tree.n_samples = {16, 8, 8, 4, 4, 4, 4};
  tree.value[3] = 1.0;   // (lo, lo)
  tree.value[4] = 2.0;   // (lo, hi)
  tree.value[5] = 2.0;   // (hi, lo)
  tree.value[6] = 7.0;   // (hi, hi)

  for (double v : {-0.5, 0.5}) {
    const std::vector<double> x = {v, v};
    const ShapVector sv = brute_force_shap(tree, x, 2);
    REQUIRE(sv.phi[0] == Catch::Approx(sv.phi[1]).margin(1e-12));
  }
}

TEST_CASE("efficiency: attributions sum to the prediction") {
  Rng rng(7);
  for (int round = 0; round < 100; ++round) {
    const Tree tree = random_tree(rng, 4, 2);
    const auto x = random_row(rng, 4);
    const ShapVector sv = brute_force_shap(tree, x, 4);
    double total = sv.base_value;
    for (double p : sv.phi) total += p;
    REQUIRE(total == Catch::Approx(tree.predict(x)).margin(1e-12));
  }
  Tree big = random_tree(rng, 4, 2);
  REQUIRE_THROWS_AS(brute_force_shap(big, random_row(rng, 16), 16), Error);
}

TEST_CASE("a constant tree attributes nothing") {
  Tree tree;
  tree.add_node();
  tree.value[0] = 4.2;
  tree.cover[0] = 32;
  tree.n_samples[0] = 32;
  const TreeEnsemble model = wrap_forest({tree}, 3);
  const ShapVector sv = tree_shap(model, std::vector<double>{0.1, 0.2, 0.3});
  REQUIRE(sv.base_value == 4.2);
  REQUIRE(sv.prediction == 4.2);
  for (double p : sv.phi) REQUIRE(p == 0.0);
}

TEST_CASE("fast path equals the brute-force oracle") {
  Rng rng(11);
  int cases = 0;
  for (int round = 0; round < 120; ++round) {
    const int d = 2 + static_cast<int>(rng.below(9));   // up to 10 features
    const int depth = 1 + static_cast<int>(rng.below(4));  // up to 4
    const Tree tree = random_tree(rng, d, depth);
    const TreeEnsemble model = wrap_forest({tree}, d);
    for (int r = 0; r < 10; ++r) {
      const auto x = random_row(rng, d);
      const ShapVector fast = tree_shap(model, x);
      const ShapVector slow = brute_force_shap(tree, x, static_cast<std::size_t>(d));
      REQUIRE(fast.base_value == Catch::Approx(slow.base_value).margin(1e-9));
      for (int f = 0; f < d; ++f)
        REQUIRE(fast.phi[static_cast<std::size_t>(f)] ==
                Catch::Approx(slow.phi[static_cast<std::size_t>(f)])
                    .margin(1e-9));
      ++cases;
    }
  }
  REQUIRE(cases >= 1000);
}

TEST_CASE("local accuracy holds on trained ensembles") {
  Rng rng(13);
  std::vector<std::vector<double>> columns(4);
  std::vector<double> y;
  for (int i = 0; i < 150; ++i) {
    for (auto& col : columns) col.push_back(rng.uniform(-1, 1));
    y.push_back(columns[0].back() * 2.0 - columns[2].back() +
                rng.normal(0.0, 0.1));
  }
  const std::vector<std::string> names = {"a", "b", "c", "d"};

  ForestParams fparams;
  fparams.n_trees = 12;
  fparams.cart = {4, 2, 0.5};
  const TreeEnsemble forest = fit_random_forest(columns, y, names, fparams, 5);

  GbtParams gparams;
  gparams.n_stages = 25;
  gparams.cart = {3, 2, 1.0};
  gparams.subsample = 0.8;
  const TreeEnsemble booster = fit_gbt(columns, y, names, gparams, 5);

  for (const TreeEnsemble* model : {&forest, &booster}) {
    for (int round = 0; round < 50; ++round) {
      const auto x = random_row(rng, 4);
      const ShapVector sv = tree_shap(*model, x);
      double total = sv.base_value;
      for (double p : sv.phi) total += p;
      REQUIRE(total == Catch::Approx(sv.prediction).margin(1e-6));
      REQUIRE(sv.prediction == model->predict_row(x));
    }
  }
}

TEST_CASE("ensemble attributions follow the combination rule") {
  Rng rng(17);
  const Tree t1 = random_tree(rng, 3, 3);
  const Tree t2 = random_tree(rng, 3, 3);
  const auto x = random_row(rng, 3);

  const ShapVector s1 = brute_force_shap(t1, x, 3);
  const ShapVector s2 = brute_force_shap(t2, x, 3);

  // Forest of two trees: mean of per-tree attributions.
  const TreeEnsemble forest = wrap_forest({t1, t2}, 3);
  const ShapVector fs = tree_shap(forest, x);
  for (int f = 0; f < 3; ++f)
    REQUIRE(fs.phi[static_cast<std::size_t>(f)] ==
            Catch::Approx(0.5 * (s1.phi[static_cast<std::size_t>(f)] +
                                 s2.phi[static_cast<std::size_t>(f)]))
                .margin(1e-9));

  // Booster: learning_rate-scaled sum on top of the base score.
  TreeEnsemble booster;
  booster.kind = ModelKind::Gbt;
  booster.feature_names = {"f0", "f1", "f2"};
  booster.base_score = 1.5;
  booster.learning_rate = 0.3;
  booster.trees = {t1, t2};
  const ShapVector bs = tree_shap(booster, x);
  for (int f = 0; f < 3; ++f)
    REQUIRE(bs.phi[static_cast<std::size_t>(f)] ==
            Catch::Approx(0.3 * (s1.phi[static_cast<std::size_t>(f)] +
                                 s2.phi[static_cast<std::size_t>(f)]))
                .margin(1e-9));
  REQUIRE(bs.base_value ==
          Catch::Approx(1.5 + 0.3 * (s1.base_value + s2.base_value))
              .margin(1e-9));
}

TEST_CASE("features absent from every tree get exactly zero") {
  Rng rng(19);
  // Trees only ever split feature 0; features 1 and 2 are dummies.
  Tree tree;
  for (int i = 0; i < 3; ++i) tree.add_node();
  tree.feature[0] = 0;
  tree.threshold[0] = 0.0;
  tree.left[0] = 1;
  tree.right[0] = 2;
  tree.cover = {10, 6, 4};
  tree.n_samples = {10, 6, 4};
  tree.value[1] = -1.0;
  tree.value[2] = 2.0;
  const TreeEnsemble model = wrap_forest({tree}, 3);
  for (int round = 0; round < 20; ++round) {
    const ShapVector sv = tree_shap(model, random_row(rng, 3));
    REQUIRE(sv.phi[1] == 0.0);
    REQUIRE(sv.phi[2] == 0.0);
  }
}

TEST_CASE("shap summary and concentration") {
  Rng rng(23);
  std::vector<std::vector<double>> columns(3);
  std::vector<double> y;
  for (int i = 0; i < 100; ++i) {
    for (auto& col : columns) col.push_back(rng.uniform(-1, 1));
    y.push_back(4.0 * columns[1].back());  // single true driver
  }
  ForestParams params;
  params.n_trees = 20;
  params.cart = {4, 2, 1.0};
  const TreeEnsemble model =
      fit_random_forest(columns, y, {"a", "b", "c"}, params, 7);

  std::vector<std::size_t> rows(30);
  std::iota(rows.begin(), rows.end(), 0);
  const ShapSummary summary = shap_summary(model, columns, rows, "m");
  REQUIRE(summary.n_rows == 30);
  // The true driver dominates mean |phi|.
  REQUIRE(summary.mean_abs_phi[1] > summary.mean_abs_phi[0]);
  REQUIRE(summary.mean_abs_phi[1] > summary.mean_abs_phi[2]);

  const ConcentrationScore score = shap_concentration(summary);
  REQUIRE(score.hhi > 0.5);
  REQUIRE(score.top1_share > 0.7);

  SECTION("one row summarizes to that row's |phi|") {
    const std::vector<std::size_t> one = {0};
    const ShapSummary single = shap_summary(model, columns, one, "m");
    std::vector<double> x(3);
    for (std::size_t c = 0; c < 3; ++c) x[c] = columns[c][0];
    const ShapVector sv = tree_shap(model, x);
    for (std::size_t c = 0; c < 3; ++c)
      REQUIRE(single.mean_abs_phi[c] == Catch::Approx(std::fabs(sv.phi[c])));
  }

  SECTION("hand-checked concentration values") {
    ShapSummary s;
    s.feature_names = {"a", "b", "c"};
    s.mean_abs_phi = {5.0, 3.0, 2.0};
    const ConcentrationScore cs = shap_concentration(s);
    REQUIRE(cs.hhi == Catch::Approx(0.38));
    REQUIRE(cs.top1_share == Catch::Approx(0.5));

    ShapSummary uniform;
    uniform.feature_names = {"a", "b", "c", "d"};
    uniform.mean_abs_phi = {1.0, 1.0, 1.0, 1.0};
    REQUIRE(shap_concentration(uniform).hhi == Catch::Approx(0.25));

    ShapSummary solo;
    solo.feature_names = {"a", "b"};
    solo.mean_abs_phi = {0.7, 0.0};
    REQUIRE(shap_concentration(solo).hhi == Catch::Approx(1.0));
    REQUIRE(shap_concentration(solo).top1_share == Catch::Approx(1.0));

    ShapSummary zero;
    zero.feature_names = {"a"};
    zero.mean_abs_phi = {0.0};
    REQUIRE_THROWS_AS(shap_concentration(zero), Error);
  }

  SECTION("summaries need rows") {
    REQUIRE_THROWS_AS(shap_summary(model, columns, {}, "m"), Error);
  }
}
