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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agroval/errors.hpp"
#include "agroval/rng.hpp"

namespace agroval {

/// Regression tree in flat form. Internal nodes route x[feature] <= threshold
/// to the left child. `cover` is the training weight that reached the node
/// (bootstrap multiplicity included); it doubles as the conditioning
/// distribution for SHAP.
struct Tree {
  std::vector<int> feature;       // -1 at leaves
  std::vector<double> threshold;  // split threshold (internal only)
  std::vector<int> left;          // -1 at leaves
  std::vector<int> right;
  std::vector<double> value;      // leaf prediction (0 at internal nodes)
  std::vector<double> cover;
  std::vector<int> n_samples;

  bool is_leaf(int node) const { return feature[static_cast<std::size_t>(node)] < 0; }
  int size() const { return static_cast<int>(feature.size()); }

  int add_node() {
    feature.push_back(-1);
    threshold.push_back(0.0);
    left.push_back(-1);
    right.push_back(-1);
    value.push_back(0.0);
    cover.push_back(0.0);
    n_samples.push_back(0);
    return size() - 1;
  }

  double predict(std::span<const double> x) const {
    int node = 0;
    while (!is_leaf(node)) {
      const auto n = static_cast<std::size_t>(node);
      node = x[static_cast<std::size_t>(feature[n])] <= threshold[n]
                 ? left[n]
                 : right[n];
    }
    return value[static_cast<std::size_t>(node)];
  }

  int max_depth_from(int node = 0) const {
    if (is_leaf(node)) return 0;
    const auto n = static_cast<std::size_t>(node);
    return 1 + std::max(max_depth_from(left[n]), max_depth_from(right[n]));
  }
};

struct CartParams {
  int max_depth = 6;              // 0 = unlimited
  int min_samples_leaf = 1;
  double feature_subsample = 1.0;  // fraction of features tried per split
};

enum class ModelKind { RandomForest, Gbt };

inline const char* model_kind_name(ModelKind k) {
  return k == ModelKind::RandomForest ? "rf" : "gbt";
}

inline ModelKind parse_model_kind(const std::string& name) {
  if (name == "rf" || name == "random_forest") return ModelKind::RandomForest;
  if (name == "gbt" || name == "xgb") return ModelKind::Gbt;
  throw Error::data("UnknownModelKind", "unknown model kind '" + name + "'");
}

struct ForestParams {
  int n_trees = 100;
  CartParams cart{6, 1, 1.0 / 3.0};
  bool bootstrap = true;
};

struct GbtParams {
  int n_stages = 100;
  CartParams cart{3, 1, 1.0};
  double learning_rate = 0.1;
  double subsample = 1.0;  // rows per stage, without replacement
};

/// Forest (mean of trees) or boosted stages
/// (base_score + learning_rate * sum of trees).
struct TreeEnsemble {
  ModelKind kind = ModelKind::RandomForest;
  std::vector<Tree> trees;
  double learning_rate = 1.0;  // gbt only
  double base_score = 0.0;     // gbt only; mean of training targets
  std::vector<std::string> feature_names;
  nlohmann::json params;  // recorded hyperparameters

  double predict_row(std::span<const double> x) const {
    if (x.size() != feature_names.size())
      throw Error::data("FeatureMismatch",
                        "row has " + std::to_string(x.size()) +
                            " features, model expects " +
                            std::to_string(feature_names.size()));
    double acc = 0.0;
    for (const auto& tree : trees) acc += tree.predict(x);
    if (kind == ModelKind::RandomForest)
      return trees.empty() ? 0.0 : acc / static_cast<double>(trees.size());
    return base_score + learning_rate * acc;
  }
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

class CartBuilder {
 public:
  CartBuilder(const std::vector<std::vector<double>>& columns,
              std::span<const double> y, const CartParams& params, Rng& rng)
      : columns_(columns), y_(y), params_(params), rng_(rng) {}

  Tree build(std::vector<std::size_t> sample_idx) {
    if (sample_idx.empty())
      throw Error::data("DegenerateData", "cannot fit a tree on zero rows");
    Tree tree;
    grow(tree, std::move(sample_idx), 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t> idx, int depth) {
    const int node = tree.add_node();
    const auto n = static_cast<double>(idx.size());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i : idx) {
      sum += y_[i];
      sum_sq += y_[i] * y_[i];
    }
    const double node_mean = sum / n;
    const double node_sse = sum_sq - sum * sum / n;
    tree.n_samples[static_cast<std::size_t>(node)] =
        static_cast<int>(idx.size());
    tree.cover[static_cast<std::size_t>(node)] = n;

    const bool depth_ok = params_.max_depth <= 0 || depth < params_.max_depth;
    const bool size_ok =
        static_cast<int>(idx.size()) >= 2 * params_.min_samples_leaf;
    SplitChoice best;
    if (depth_ok && size_ok && node_sse > 0.0)
      best = find_best_split(idx);
    if (best.feature < 0 || !(best.sse < node_sse)) {
      tree.value[static_cast<std::size_t>(node)] = node_mean;
      return node;
    }

    tree.feature[static_cast<std::size_t>(node)] = best.feature;
    tree.threshold[static_cast<std::size_t>(node)] = best.threshold;
    std::vector<std::size_t> left_idx, right_idx;
    const auto& col = columns_[static_cast<std::size_t>(best.feature)];
    for (std::size_t i : idx)
      (col[i] <= best.threshold ? left_idx : right_idx).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int left = grow(tree, std::move(left_idx), depth + 1);
    const int right = grow(tree, std::move(right_idx), depth + 1);
    tree.left[static_cast<std::size_t>(node)] = left;
    tree.right[static_cast<std::size_t>(node)] = right;
    return node;
  }

  std::vector<int> candidate_features() {
    const int d = static_cast<int>(columns_.size());
    int k = d;
    if (params_.feature_subsample < 1.0)
      k = std::clamp(
          static_cast<int>(std::llround(params_.feature_subsample * d)), 1, d);
    std::vector<int> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    if (k == d) return all;
    // Partial Fisher-Yates, then ascending order for a deterministic scan.
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(rng_.below(
                             static_cast<std::uint64_t>(d - i)));
      std::swap(all[static_cast<std::size_t>(i)],
                all[static_cast<std::size_t>(j)]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
  }

  SplitChoice find_best_split(const std::vector<std::size_t>& idx) {
    SplitChoice best;
    std::vector<std::pair<double, double>> pairs;  // (x, y)
    pairs.reserve(idx.size());
    for (int f : candidate_features()) {
      const auto& col = columns_[static_cast<std::size_t>(f)];
      pairs.clear();
      for (std::size_t i : idx) pairs.emplace_back(col[i], y_[i]);
      std::sort(pairs.begin(), pairs.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      const auto n = pairs.size();
      double total = 0.0, total_sq = 0.0;
      for (const auto& [x, y] : pairs) {
        total += y;
        total_sq += y * y;
      }
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_sum += pairs[i - 1].second;
        left_sq += pairs[i - 1].second * pairs[i - 1].second;
        if (pairs[i].first == pairs[i - 1].first) continue;
        const auto n_left = static_cast<double>(i);
        const auto n_right = static_cast<double>(n - i);
        if (i < static_cast<std::size_t>(params_.min_samples_leaf) ||
            n - i < static_cast<std::size_t>(params_.min_samples_leaf))
          continue;
        const double sse_left = left_sq - left_sum * left_sum / n_left;
        const double sse_right = (total_sq - left_sq) -
                                 (total - left_sum) * (total - left_sum) /
                                     n_right;
        const double sse = sse_left + sse_right;
        if (sse < best.sse) {
          best.sse = sse;
          best.feature = f;
          best.threshold = 0.5 * (pairs[i - 1].first + pairs[i].first);
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& columns_;
  std::span<const double> y_;
  const CartParams& params_;
  Rng& rng_;
};

}  // namespace detail

/// Greedy variance-reduction CART. Split candidates are midpoints between
/// consecutive sorted unique feature values; leaves predict the sample mean.
/// Tree t of a forest uses the substream derive_seed(seed, t); this
/// standalone fit uses substream 0 so it matches a one-tree forest without
/// bootstrap.
inline Tree fit_cart(const std::vector<std::vector<double>>& columns,
                     std::span<const double> y, const CartParams& params,
                     std::uint64_t seed) {
  if (columns.empty())
    throw Error::data("DegenerateData", "no feature columns");
  if (y.empty())
    throw Error::data("DegenerateData", "cannot fit a tree on zero rows");
  Rng rng(derive_seed(seed, 0));
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  detail::CartBuilder builder(columns, y, params, rng);
  return builder.build(std::move(idx));
}

inline TreeEnsemble fit_random_forest(
    const std::vector<std::vector<double>>& columns, std::span<const double> y,
    const std::vector<std::string>& feature_names, const ForestParams& params,
    std::uint64_t seed) {
  if (y.empty())
    throw Error::data("DegenerateData", "cannot fit a forest on zero rows");
  TreeEnsemble model;
  model.kind = ModelKind::RandomForest;
  model.feature_names = feature_names;
  model.params = {{"n_trees", params.n_trees},
                  {"max_depth", params.cart.max_depth},
                  {"min_samples_leaf", params.cart.min_samples_leaf},
                  {"feature_subsample", params.cart.feature_subsample},
                  {"bootstrap", params.bootstrap},
                  {"seed", seed}};
  const std::size_t n = y.size();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> idx(n);
    if (params.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
      std::sort(idx.begin(), idx.end());
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    detail::CartBuilder builder(columns, y, params.cart, rng);
    model.trees.push_back(builder.build(std::move(idx)));
  }
  return model;
}

inline TreeEnsemble fit_gbt(const std::vector<std::vector<double>>& columns,
                            std::span<const double> y,
                            const std::vector<std::string>& feature_names,
                            const GbtParams& params, std::uint64_t seed) {
  if (y.empty())
    throw Error::data("DegenerateData", "cannot fit on zero rows");
  TreeEnsemble model;
  model.kind = ModelKind::Gbt;
  model.feature_names = feature_names;
  model.learning_rate = params.learning_rate;
  model.params = {{"n_trees", params.n_stages},
                  {"max_depth", params.cart.max_depth},
                  {"min_samples_leaf", params.cart.min_samples_leaf},
                  {"learning_rate", params.learning_rate},
                  {"subsample", params.subsample},
                  {"seed", seed}};
  const std::size_t n = y.size();
  double base = 0.0;
  for (double v : y) base += v;
  base /= static_cast<double>(n);
  model.base_score = base;

  std::vector<double> residual(y.begin(), y.end());
  for (auto& r : residual) r -= base;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (int stage = 0; stage < params.n_stages; ++stage) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(stage)));
    std::vector<std::size_t> idx = all;
    if (params.subsample < 1.0) {
      rng.shuffle(idx);
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.subsample *
                                      static_cast<double>(n)));
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
    }
    detail::CartBuilder builder(columns, residual, params.cart, rng);
    Tree tree = builder.build(std::move(idx));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(columns.size());
      for (std::size_t c = 0; c < columns.size(); ++c) row[c] = columns[c][i];
      residual[i] -= params.learning_rate * tree.predict(row);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline std::vector<double> predict(
    const TreeEnsemble& model, const std::vector<std::vector<double>>& columns,
    const std::vector<std::size_t>& row_indices) {
  std::vector<double> out;
  out.reserve(row_indices.size());
  std::vector<double> row(columns.size());
  for (std::size_t r : row_indices) {
    for (std::size_t c = 0; c < columns.size(); ++c) row[c] = columns[c][r];
    out.push_back(model.predict_row(row));
  }
  return out;
}

// --- Serialization ---------------------------------------------------------

namespace detail {

inline nlohmann::json tree_node_to_json(const Tree& tree, int node) {
  const auto n = static_cast<std::size_t>(node);
  nlohmann::json j;
  j["n_samples"] = tree.n_samples[n];
  j["cover"] = tree.cover[n];
  if (tree.is_leaf(node)) {
    j["value"] = tree.value[n];
  } else {
    j["feature"] = tree.feature[n];
    j["threshold"] = tree.threshold[n];
    j["left"] = tree_node_to_json(tree, tree.left[n]);
    j["right"] = tree_node_to_json(tree, tree.right[n]);
  }
  return j;
}

inline int tree_node_from_json(const nlohmann::json& j, Tree& tree) {
  const int node = tree.add_node();
  const auto n = static_cast<std::size_t>(node);
  tree.n_samples[n] = j.at("n_samples").get<int>();
  tree.cover[n] = j.at("cover").get<double>();
  if (j.contains("feature")) {
    tree.feature[n] = j.at("feature").get<int>();
    tree.threshold[n] = j.at("threshold").get<double>();
    const int left = tree_node_from_json(j.at("left"), tree);
    const int right = tree_node_from_json(j.at("right"), tree);
    tree.left[n] = left;
    tree.right[n] = right;
  } else {
    tree.value[n] = j.at("value").get<double>();
  }
  return node;
}

}  // namespace detail

inline nlohmann::json model_to_json(const TreeEnsemble& model) {
  nlohmann::json j;
  j["kind"] = model.kind == ModelKind::RandomForest ? "random_forest" : "gbt";
  j["params"] = model.params;
  j["feature_names"] = model.feature_names;
  j["base_score"] = model.base_score;
  j["learning_rate"] = model.learning_rate;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees)
    trees.push_back(detail::tree_node_to_json(tree, 0));
  j["trees"] = std::move(trees);
  return j;
}

inline TreeEnsemble model_from_json(const nlohmann::json& j) {
  TreeEnsemble model;
  const auto kind = j.at("kind").get<std::string>();
  model.kind =
      kind == "random_forest" ? ModelKind::RandomForest : ModelKind::Gbt;
  model.params = j.value("params", nlohmann::json::object());
  model.feature_names =
      j.at("feature_names").get<std::vector<std::string>>();
  model.base_score = j.at("base_score").get<double>();
  model.learning_rate = j.at("learning_rate").get<double>();
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    detail::tree_node_from_json(tj, tree);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline void save_model(const TreeEnsemble& model, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw Error::run("FileWriteFailed", "cannot write '" + path + "'");
  out << model_to_json(model).dump(2) << '\n';
}

inline TreeEnsemble load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("FileNotFound", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error::data("MalformedRow", path + ": " + e.what());
  }
  return model_from_json(j);
}

// --- Grid search ------------------------------------------------------------

/// Per-model hyperparameter lists; the grid is their Cartesian product in
/// the listed order (n_trees outermost).
struct HyperGrid {
  std::vector<int> n_trees = {100, 300};
  std::vector<int> max_depth = {3, 6, 10};
  std::vector<int> min_samples_leaf = {1, 5};
  std::vector<double> feature_subsample = {1.0 / 3.0};  // rf only
  std::vector<double> learning_rate = {0.05, 0.1};      // gbt only
  std::vector<double> subsample = {1.0};                // gbt only
};

struct GridPoint {
  int n_trees = 100;
  int max_depth = 6;
  int min_samples_leaf = 1;
  double feature_subsample = 1.0;
  double learning_rate = 0.1;
  double subsample = 1.0;

  nlohmann::json to_json(ModelKind kind) const {
    nlohmann::json j = {{"n_trees", n_trees},
                        {"max_depth", max_depth},
                        {"min_samples_leaf", min_samples_leaf}};
    if (kind == ModelKind::RandomForest) {
      j["feature_subsample"] = feature_subsample;
    } else {
      j["learning_rate"] = learning_rate;
      j["subsample"] = subsample;
    }
    return j;
  }
};

inline std::vector<GridPoint> enumerate_grid(const HyperGrid& grid,
                                             ModelKind kind) {
  std::vector<GridPoint> points;
  for (int nt : grid.n_trees)
    for (int depth : grid.max_depth)
      for (int leaf : grid.min_samples_leaf) {
        if (kind == ModelKind::RandomForest) {
          for (double fs : grid.feature_subsample) {
            GridPoint p;
            p.n_trees = nt;
            p.max_depth = depth;
            p.min_samples_leaf = leaf;
            p.feature_subsample = fs;
            points.push_back(p);
          }
        } else {
          for (double lr : grid.learning_rate)
            for (double ss : grid.subsample) {
              GridPoint p;
              p.n_trees = nt;
              p.max_depth = depth;
              p.min_samples_leaf = leaf;
              p.learning_rate = lr;
              p.subsample = ss;
              points.push_back(p);
            }
        }
      }
  if (points.empty())
    throw Error::data("ConfigInvalid", "hyperparameter grid is empty");
  return points;
}

inline TreeEnsemble fit_with_point(
    const std::vector<std::vector<double>>& columns, std::span<const double> y,
    const std::vector<std::string>& feature_names, ModelKind kind,
    const GridPoint& p, std::uint64_t seed) {
  if (kind == ModelKind::RandomForest) {
    ForestParams params;
    params.n_trees = p.n_trees;
    params.cart = {p.max_depth, p.min_samples_leaf, p.feature_subsample};
    return fit_random_forest(columns, y, feature_names, params, seed);
  }
  GbtParams params;
  params.n_stages = p.n_trees;
  params.cart = {p.max_depth, p.min_samples_leaf, 1.0};
  params.learning_rate = p.learning_rate;
  params.subsample = p.subsample;
  return fit_gbt(columns, y, feature_names, params, seed);
}

struct CvCell {
  GridPoint point;
  std::vector<double> fold_rmse;
  double mean_rmse = 0.0;
};

struct GridSearchResult {
  GridPoint best;
  std::vector<CvCell> table;
};

/// Mean fold RMSE per grid point over expanding-window folds (rows are
/// assigned to folds by their year). The argmin wins; exact ties go to the
/// first point in grid enumeration order.
template <typename Folds>
GridSearchResult grid_search(const std::vector<std::vector<double>>& columns,
                             std::span<const double> y,
                             std::span<const int> row_years,
                             const std::vector<std::string>& feature_names,
                             ModelKind kind, const HyperGrid& grid,
                             const Folds& folds, std::uint64_t seed) {
  if (row_years.size() != y.size())
    throw Error::data("LengthMismatch", "row_years must align with targets");
  GridSearchResult result;
  double best_rmse = std::numeric_limits<double>::infinity();
  const auto points = enumerate_grid(grid, kind);
  for (const auto& point : points) {
    CvCell cell;
    cell.point = point;
    double total = 0.0;
    for (const auto& fold : folds) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const int year = row_years[i];
        if (std::find(fold.train_years.begin(), fold.train_years.end(),
                      year) != fold.train_years.end())
          train_rows.push_back(i);
        else if (std::find(fold.test_years.begin(), fold.test_years.end(),
                           year) != fold.test_years.end())
          test_rows.push_back(i);
      }
      if (train_rows.empty() || test_rows.empty())
        throw Error::data("TooFewYears",
                          "a cross-validation fold has no rows");
      std::vector<std::vector<double>> fold_columns(columns.size());
      std::vector<double> fold_y;
      fold_y.reserve(train_rows.size());
      for (std::size_t c = 0; c < columns.size(); ++c) {
        fold_columns[c].reserve(train_rows.size());
        for (std::size_t i : train_rows) fold_columns[c].push_back(columns[c][i]);
      }
      for (std::size_t i : train_rows) fold_y.push_back(y[i]);
      const TreeEnsemble model =
          fit_with_point(fold_columns, fold_y, feature_names, kind, point, seed);
      const std::vector<double> pred = predict(model, columns, test_rows);
      double sse = 0.0;
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        const double e = y[test_rows[i]] - pred[i];
        sse += e * e;
      }
      cell.fold_rmse.push_back(
          std::sqrt(sse / static_cast<double>(test_rows.size())));
      total += cell.fold_rmse.back();
    }
    cell.mean_rmse = total / static_cast<double>(cell.fold_rmse.size());
    if (cell.mean_rmse < best_rmse) {
      best_rmse = cell.mean_rmse;
      result.best = point;
    }
    result.table.push_back(std::move(cell));
  }
  return result;
}

}  // namespace agroval
