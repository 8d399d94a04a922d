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
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agroval/errors.hpp"
#include "agroval/models.hpp"

namespace agroval {

/// Per-feature attribution of one prediction. base_value is the expected
/// model output under the trees' cover-weighted conditioning distribution;
/// base_value + sum(phi) equals the prediction (local accuracy).
struct ShapVector {
  std::vector<double> phi;
  double base_value = 0.0;
  double prediction = 0.0;
};

namespace detail {

struct PathElement {
  int feature_index;
  double zero_fraction;
  double one_fraction;
  double pweight;
};

inline void extend_path(PathElement* path, int unique_depth,
                        double zero_fraction, double one_fraction,
                        int feature_index) {
  path[unique_depth] = {feature_index, zero_fraction, one_fraction,
                        unique_depth == 0 ? 1.0 : 0.0};
  for (int i = unique_depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) /
                           static_cast<double>(unique_depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (unique_depth - i) /
                      static_cast<double>(unique_depth + 1);
  }
}

inline void unwind_path(PathElement* path, int unique_depth, int path_index) {
  const double one_fraction = path[path_index].one_fraction;
  const double zero_fraction = path[path_index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (unique_depth + 1) /
                        static_cast<double>((i + 1) * one_fraction);
      next_one_portion = tmp - path[i].pweight * zero_fraction *
                                   (unique_depth - i) /
                                   static_cast<double>(unique_depth + 1);
    } else {
      path[i].pweight = path[i].pweight * (unique_depth + 1) /
                        (zero_fraction * (unique_depth - i));
    }
  }
  for (int i = path_index; i < unique_depth; ++i) {
    path[i].feature_index = path[i + 1].feature_index;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

inline double unwound_path_sum(const PathElement* path, int unique_depth,
                               int path_index) {
  const double one_fraction = path[path_index].one_fraction;
  const double zero_fraction = path[path_index].zero_fraction;
  double next_one_portion = path[unique_depth].pweight;
  double total = 0.0;
  for (int i = unique_depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * (unique_depth + 1) /
                         static_cast<double>((i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction *
                                               (unique_depth - i) /
                                               static_cast<double>(
                                                   unique_depth + 1);
    } else if (zero_fraction != 0.0) {
      total += (path[i].pweight / zero_fraction) /
               ((unique_depth - i) / static_cast<double>(unique_depth + 1));
    }
  }
  return total;
}

// Recursive conditional-expectation traversal (the exact polynomial-time
// tree attribution algorithm, cover weights as the background).
inline void tree_shap_recurse(const Tree& tree, std::span<const double> x,
                              std::vector<double>& phi, int node,
                              int unique_depth, PathElement* parent_path,
                              double parent_zero_fraction,
                              double parent_one_fraction,
                              int parent_feature_index) {
  PathElement* path = parent_path + unique_depth + 1;
  std::copy(parent_path, parent_path + unique_depth + 1, path);
  extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction,
              parent_feature_index);
  const auto ni = static_cast<std::size_t>(node);

  if (tree.is_leaf(node)) {
    for (int i = 1; i <= unique_depth; ++i) {
      const double w = unwound_path_sum(path, unique_depth, i);
      const PathElement& el = path[i];
      phi[static_cast<std::size_t>(el.feature_index)] +=
          w * (el.one_fraction - el.zero_fraction) * tree.value[ni];
    }
    return;
  }

  const int split_feature = tree.feature[ni];
  const int hot =
      x[static_cast<std::size_t>(split_feature)] <= tree.threshold[ni]
          ? tree.left[ni]
          : tree.right[ni];
  const int cold = hot == tree.left[ni] ? tree.right[ni] : tree.left[ni];
  const double w = tree.cover[ni];
  if (!(w > 0.0))
    throw Error::data("MissingCover",
                      "node without positive cover weight; refit or reload "
                      "the model with training covers");
  const double hot_zero_fraction =
      tree.cover[static_cast<std::size_t>(hot)] / w;
  const double cold_zero_fraction =
      tree.cover[static_cast<std::size_t>(cold)] / w;
  double incoming_zero_fraction = 1.0;
  double incoming_one_fraction = 1.0;

  // If this feature was split on above, undo that extension first.
  int path_index = 0;
  for (; path_index <= unique_depth; ++path_index)
    if (path[path_index].feature_index == split_feature) break;
  if (path_index != unique_depth + 1) {
    incoming_zero_fraction = path[path_index].zero_fraction;
    incoming_one_fraction = path[path_index].one_fraction;
    unwind_path(path, unique_depth, path_index);
    unique_depth -= 1;
  }

  tree_shap_recurse(tree, x, phi, hot, unique_depth + 1, path,
                    hot_zero_fraction * incoming_zero_fraction,
                    incoming_one_fraction, split_feature);
  tree_shap_recurse(tree, x, phi, cold, unique_depth + 1, path,
                    cold_zero_fraction * incoming_zero_fraction, 0.0,
                    split_feature);
}

inline double tree_expected_value(const Tree& tree, int node = 0) {
  if (tree.is_leaf(node)) return tree.value[static_cast<std::size_t>(node)];
  const auto n = static_cast<std::size_t>(node);
  const double cl = tree.cover[static_cast<std::size_t>(tree.left[n])];
  const double cr = tree.cover[static_cast<std::size_t>(tree.right[n])];
  if (!(cl + cr > 0.0))
    throw Error::data("MissingCover", "node without positive cover weight");
  return (cl * tree_expected_value(tree, tree.left[n]) +
          cr * tree_expected_value(tree, tree.right[n])) /
         (cl + cr);
}

inline void single_tree_shap(const Tree& tree, std::span<const double> x,
                             std::vector<double>& phi) {
  if (tree.is_leaf(0)) return;  // constant tree: no feature influence
  const int maxd = tree.max_depth_from() + 2;
  std::vector<PathElement> storage(
      static_cast<std::size_t>(maxd * (maxd + 1)) / 2);
  tree_shap_recurse(tree, x, phi, 0, 0, storage.data(), 1.0, 1.0, -1);
}

}  // namespace detail

/// Exact SHAP values for one row of an ensemble: per-tree attributions are
/// averaged for forests and summed (scaled by the learning rate) for
/// boosted stages, matching each ensemble's combination rule.
inline ShapVector tree_shap(const TreeEnsemble& model,
                            std::span<const double> x) {
  if (x.size() != model.feature_names.size())
    throw Error::data("FeatureMismatch",
                      "row has " + std::to_string(x.size()) +
                          " features, model expects " +
                          std::to_string(model.feature_names.size()));
  ShapVector out;
  out.phi.assign(x.size(), 0.0);
  double base = 0.0;
  for (const auto& tree : model.trees) {
    detail::single_tree_shap(tree, x, out.phi);
    base += detail::tree_expected_value(tree);
  }
  if (model.kind == ModelKind::RandomForest) {
    const double n = model.trees.empty()
                         ? 1.0
                         : static_cast<double>(model.trees.size());
    for (auto& p : out.phi) p /= n;
    out.base_value = base / n;
  } else {
    for (auto& p : out.phi) p *= model.learning_rate;
    out.base_value = model.base_score + model.learning_rate * base;
  }
  out.prediction = model.predict_row(x);
  return out;
}

/// Verification oracle: classic Shapley formula by full subset enumeration.
/// v(S) fixes the features in S to x and follows the tree's cover-weighted
/// paths for the rest. Exponential in the feature count, hence the cap.
inline ShapVector brute_force_shap(const Tree& tree, std::span<const double> x,
                                   std::size_t n_features) {
  if (n_features > 15)
    throw Error::data("TooManyFeatures",
                      "brute-force Shapley enumerates 2^d subsets; d must "
                      "be <= 15");
  const auto d = static_cast<int>(n_features);

  // v(S) for every subset mask.
  const std::size_t n_masks = std::size_t{1} << d;
  std::vector<double> v(n_masks);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    // Recursive expectation with features in `mask` fixed to x.
    auto eval = [&](auto&& self, int node) -> double {
      if (tree.is_leaf(node))
        return tree.value[static_cast<std::size_t>(node)];
      const auto n = static_cast<std::size_t>(node);
      const int f = tree.feature[n];
      if (mask >> f & 1)
        return self(self, x[static_cast<std::size_t>(f)] <= tree.threshold[n]
                              ? tree.left[n]
                              : tree.right[n]);
      const double cl = tree.cover[static_cast<std::size_t>(tree.left[n])];
      const double cr = tree.cover[static_cast<std::size_t>(tree.right[n])];
      return (cl * self(self, tree.left[n]) + cr * self(self, tree.right[n])) /
             (cl + cr);
    };
    v[mask] = eval(eval, 0);
  }

  // Shapley weights |S|! (d - |S| - 1)! / d!.
  std::vector<double> factorial(static_cast<std::size_t>(d) + 1, 1.0);
  for (std::size_t k = 1; k < factorial.size(); ++k)
    factorial[k] = factorial[k - 1] * static_cast<double>(k);
  std::vector<double> weight(static_cast<std::size_t>(d), 0.0);
  for (int s = 0; s < d; ++s)
    weight[static_cast<std::size_t>(s)] =
        factorial[static_cast<std::size_t>(s)] *
        factorial[static_cast<std::size_t>(d - s - 1)] /
        factorial[static_cast<std::size_t>(d)];

  ShapVector out;
  out.phi.assign(n_features, 0.0);
  for (int i = 0; i < d; ++i) {
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask >> i & 1) continue;
      const int s = std::popcount(mask);
      phi += weight[static_cast<std::size_t>(s)] *
             (v[mask | (std::size_t{1} << i)] - v[mask]);
    }
    out.phi[static_cast<std::size_t>(i)] = phi;
  }
  out.base_value = v[0];
  out.prediction = tree.predict(x);
  return out;
}

/// Mean |phi| per feature over a set of rows.
struct ShapSummary {
  std::string model_id;
  std::vector<std::string> feature_names;
  std::vector<double> mean_abs_phi;
  double mean_base_value = 0.0;
  std::size_t n_rows = 0;
};

inline ShapSummary shap_summary(
    const TreeEnsemble& model,
    const std::vector<std::vector<double>>& columns,
    const std::vector<std::size_t>& row_indices,
    const std::string& model_id = {}) {
  if (row_indices.empty())
    throw Error::data("EmptyRows", "SHAP summary over zero rows");
  ShapSummary summary;
  summary.model_id = model_id;
  summary.feature_names = model.feature_names;
  summary.mean_abs_phi.assign(model.feature_names.size(), 0.0);
  summary.n_rows = row_indices.size();
  std::vector<double> row(columns.size());
  for (std::size_t r : row_indices) {
    for (std::size_t c = 0; c < columns.size(); ++c) row[c] = columns[c][r];
    const ShapVector sv = tree_shap(model, row);
    for (std::size_t c = 0; c < sv.phi.size(); ++c)
      summary.mean_abs_phi[c] += std::fabs(sv.phi[c]);
    summary.mean_base_value += sv.base_value;
  }
  const auto n = static_cast<double>(row_indices.size());
  for (auto& v : summary.mean_abs_phi) v /= n;
  summary.mean_base_value /= n;
  return summary;
}

/// Concentration of importance: Herfindahl-Hirschman index of normalized
/// shares (1/d uniform .. 1 single-feature) plus the top-1 share.
struct ConcentrationScore {
  double hhi = 0.0;
  double top1_share = 0.0;
};

inline ConcentrationScore shap_concentration(const ShapSummary& summary) {
  double total = 0.0;
  for (double v : summary.mean_abs_phi) total += v;
  if (!(total > 0.0))
    throw Error::data("AllZeroImportance",
                      "all mean |phi| are zero; concentration undefined");
  ConcentrationScore score;
  for (double v : summary.mean_abs_phi) {
    const double share = v / total;
    score.hhi += share * share;
    score.top1_share = std::max(score.top1_share, share);
  }
  return score;
}

}  // namespace agroval
