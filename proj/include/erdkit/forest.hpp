#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "erdkit/error.hpp"
#include "erdkit/rng.hpp"

namespace erdkit {

enum class SplitFeatureRule { all, sqrt_rule, fraction };

struct ForestConfig {
  int n_trees = 10;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  SplitFeatureRule features_per_split = SplitFeatureRule::all;
  double feature_fraction = 1.0;  // used when features_per_split == fraction
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Single-tree fully-grown configuration; memorizes any training set with
/// distinct inputs.
inline ForestConfig memorizing_forest_config(std::uint64_t seed = 0) {
  ForestConfig c;
  c.n_trees = 1;
  c.bootstrap = false;
  c.max_depth = 0;
  c.min_samples_leaf = 1;
  c.features_per_split = SplitFeatureRule::all;
  c.seed = seed;
  return c;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean
};

struct ForestModel {
  ForestConfig config;
  std::size_t dimension = 0;
  double y_min = 0.0;
  double y_max = 0.0;
  std::vector<std::vector<TreeNode>> trees;
};

namespace detail {

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<double>& y;
  const ForestConfig& config;
  Rng& rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t>& samples, int depth) {
    const std::size_t n = samples.size();
    double sum = 0.0;
    for (std::size_t i : samples) sum += y[i];
    const double mean = sum / static_cast<double>(n);

    bool pure = true;
    for (std::size_t i : samples) {
      if (y[i] != y[samples.front()]) { pure = false; break; }
    }
    const bool depth_capped = config.max_depth > 0 && depth >= config.max_depth;
    if (pure || depth_capped || n < 2 * static_cast<std::size_t>(config.min_samples_leaf) || n < 2) {
      return make_leaf(mean);
    }

    double parent_sse = 0.0;
    for (std::size_t i : samples) {
      const double d = y[i] - mean;
      parent_sse += d * d;
    }

    const auto candidates = candidate_features();
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_sse = parent_sse;
    // the cross-feature comparison tolerates accumulation-order rounding;
    // ties resolve to the first feature index, then the smaller threshold
    const double tie_margin = 1e-12 * std::max(1.0, parent_sse);
    std::vector<std::pair<double, std::size_t>> order(n);
    for (int f : candidates) {
      for (std::size_t k = 0; k < n; ++k) order[k] = {x[samples[k]][static_cast<std::size_t>(f)], samples[k]};
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      // prefix sweep over boundaries between distinct values picks this
      // feature's candidate threshold
      double left_sum = 0.0;
      double left_sumsq = 0.0;
      double total_sumsq = 0.0;
      for (std::size_t k = 0; k < n; ++k) total_sumsq += y[order[k].second] * y[order[k].second];
      double feature_best_sse = 0.0;
      double feature_threshold = 0.0;
      bool feature_has_split = false;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double yi = y[order[k].second];
        left_sum += yi;
        left_sumsq += yi * yi;
        if (order[k].first == order[k + 1].first) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        if (nl < static_cast<std::size_t>(config.min_samples_leaf) ||
            nr < static_cast<std::size_t>(config.min_samples_leaf)) {
          continue;
        }
        const double right_sum = sum - left_sum;
        const double right_sumsq = total_sumsq - left_sumsq;
        const double sse = (left_sumsq - left_sum * left_sum / static_cast<double>(nl)) +
                           (right_sumsq - right_sum * right_sum / static_cast<double>(nr));
        if (!feature_has_split || sse < feature_best_sse) {
          feature_has_split = true;
          feature_best_sse = sse;
          feature_threshold = order[k + 1].first;  // split: x < threshold goes left
        }
      }
      if (!feature_has_split) continue;
      // canonical partition SSE, accumulated in sample order, keeps the
      // cross-feature comparison independent of each feature's sort order
      const double canonical = partition_sse(samples, static_cast<std::size_t>(f), feature_threshold);
      if (canonical < best_sse - tie_margin) {
        best_sse = canonical;
        best_feature = f;
        best_threshold = feature_threshold;
      }
    }

    if (best_feature < 0) return make_leaf(mean);

    std::vector<std::size_t> left_samples;
    std::vector<std::size_t> right_samples;
    for (std::size_t i : samples) {
      (x[i][static_cast<std::size_t>(best_feature)] < best_threshold ? left_samples : right_samples).push_back(i);
    }
    if (left_samples.empty() || right_samples.empty()) return make_leaf(mean);

    const int node_index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(node_index)].feature = best_feature;
    nodes[static_cast<std::size_t>(node_index)].threshold = best_threshold;
    const int left = build(left_samples, depth + 1);
    const int right = build(right_samples, depth + 1);
    nodes[static_cast<std::size_t>(node_index)].left = left;
    nodes[static_cast<std::size_t>(node_index)].right = right;
    return node_index;
  }

  int make_leaf(double mean) {
    nodes.emplace_back();
    nodes.back().value = mean;
    return static_cast<int>(nodes.size() - 1);
  }

  /// Child SSE of the partition induced by (feature, threshold), accumulated
  /// in sample order. Features inducing the same partition get bit-identical
  /// values, so exact ties break by feature index rather than by rounding.
  double partition_sse(const std::vector<std::size_t>& samples, std::size_t feature, double threshold) const {
    double sum_left = 0.0, sum_right = 0.0;
    std::size_t n_left = 0, n_right = 0;
    for (std::size_t i : samples) {
      if (x[i][feature] < threshold) {
        sum_left += y[i];
        ++n_left;
      } else {
        sum_right += y[i];
        ++n_right;
      }
    }
    const double mean_left = sum_left / static_cast<double>(n_left);
    const double mean_right = sum_right / static_cast<double>(n_right);
    double sse = 0.0;
    for (std::size_t i : samples) {
      const double d = y[i] - (x[i][feature] < threshold ? mean_left : mean_right);
      sse += d * d;
    }
    return sse;
  }

  std::vector<int> candidate_features() const {
    const std::size_t dim = x.front().size();
    std::size_t count = dim;
    switch (config.features_per_split) {
      case SplitFeatureRule::all:
        break;
      case SplitFeatureRule::sqrt_rule:
        count = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
        break;
      case SplitFeatureRule::fraction:
        count = static_cast<std::size_t>(std::ceil(config.feature_fraction * static_cast<double>(dim)));
        break;
    }
    count = std::clamp<std::size_t>(count, 1, dim);
    std::vector<int> all(dim);
    std::iota(all.begin(), all.end(), 0);
    if (count == dim) return all;
    // partial Fisher-Yates, then ascending so the tie rule stays well-defined
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(all[i], all[i + static_cast<std::size_t>(rng.below(dim - i))]);
    }
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
  }
};

}  // namespace detail

inline void validate_forest_config(const ForestConfig& config) {
  if (config.n_trees < 1) throw ValidationError("forest config: n_trees must be >= 1");
  if (config.min_samples_leaf < 1) throw ValidationError("forest config: min_samples_leaf must be >= 1");
  if (config.max_depth < 0) throw ValidationError("forest config: max_depth must be >= 0");
  if (config.features_per_split == SplitFeatureRule::fraction &&
      !(config.feature_fraction > 0.0 && config.feature_fraction <= 1.0)) {
    throw ValidationError("forest config: feature_fraction must be in (0, 1]");
  }
}

inline ForestModel train_forest(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                const ForestConfig& config) {
  validate_forest_config(config);
  if (x.empty() || y.empty()) throw ValidationError("train_forest: empty training data");
  if (x.size() != y.size()) {
    throw ValidationError("train_forest: " + std::to_string(x.size()) + " inputs vs " +
                          std::to_string(y.size()) + " targets");
  }
  const std::size_t dim = x.front().size();
  if (dim == 0) throw ValidationError("train_forest: zero-dimensional inputs");
  for (const auto& row : x) {
    if (row.size() != dim) throw ValidationError("train_forest: ragged input dimensions");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("train_forest: non-finite target");
  }

  ForestModel model;
  model.config = config;
  model.dimension = dim;
  model.y_min = *std::min_element(y.begin(), y.end());
  model.y_max = *std::max_element(y.begin(), y.end());
  model.trees.reserve(static_cast<std::size_t>(config.n_trees));

  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, "tree:" + std::to_string(t)));
    std::vector<std::size_t> samples;
    samples.reserve(x.size());
    if (config.bootstrap) {
      for (std::size_t i = 0; i < x.size(); ++i) samples.push_back(static_cast<std::size_t>(rng.below(x.size())));
    } else {
      samples.resize(x.size());
      std::iota(samples.begin(), samples.end(), 0);
    }
    detail::TreeBuilder builder{x, y, config, rng, {}};
    builder.build(samples, 0);
    model.trees.push_back(std::move(builder.nodes));
  }
  return model;
}

inline double predict_tree(const std::vector<TreeNode>& nodes, const std::vector<double>& x) {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] < nodes[i].threshold
                                     ? nodes[i].left
                                     : nodes[i].right);
  }
  return nodes[i].value;
}

/// Mean of per-tree leaf predictions; always within the training target range.
inline double predict_forest(const ForestModel& model, const std::vector<double>& x) {
  if (x.size() != model.dimension) {
    throw ValidationError("predict_forest: input dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(model.dimension));
  }
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += predict_tree(tree, x);
  return sum / static_cast<double>(model.trees.size());
}

inline nlohmann::json forest_to_json(const ForestModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) {
      nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"v", n.value}});
    }
    trees.push_back(std::move(nodes));
  }
  return nlohmann::json{
      {"format", "erdkit.forest"},
      {"version", 1},
      {"config",
       {{"n_trees", model.config.n_trees},
        {"max_depth", model.config.max_depth},
        {"min_samples_leaf", model.config.min_samples_leaf},
        {"features_per_split", static_cast<int>(model.config.features_per_split)},
        {"feature_fraction", model.config.feature_fraction},
        {"bootstrap", model.config.bootstrap},
        {"seed", model.config.seed}}},
      {"dimension", model.dimension},
      {"y_min", model.y_min},
      {"y_max", model.y_max},
      {"trees", std::move(trees)}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "erdkit.forest" || j.value("version", 0) != 1) {
    throw ValidationError("forest_from_json: not a version-1 erdkit.forest container");
  }
  ForestModel model;
  const auto& c = j.at("config");
  model.config.n_trees = c.at("n_trees").get<int>();
  model.config.max_depth = c.at("max_depth").get<int>();
  model.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
  model.config.features_per_split = static_cast<SplitFeatureRule>(c.at("features_per_split").get<int>());
  model.config.feature_fraction = c.at("feature_fraction").get<double>();
  model.config.bootstrap = c.at("bootstrap").get<bool>();
  model.config.seed = c.at("seed").get<std::uint64_t>();
  model.dimension = j.at("dimension").get<std::size_t>();
  model.y_min = j.at("y_min").get<double>();
  model.y_max = j.at("y_max").get<double>();
  for (const auto& tree_json : j.at("trees")) {
    std::vector<TreeNode> tree;
    tree.reserve(tree_json.size());
    for (const auto& n : tree_json) {
      TreeNode node;
      node.feature = n.at("f").get<int>();
      node.threshold = n.at("t").get<double>();
      node.left = n.at("l").get<int>();
      node.right = n.at("r").get<int>();
      node.value = n.at("v").get<double>();
      tree.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace erdkit
