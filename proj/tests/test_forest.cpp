#include <catch2/catch_amalgamated.hpp>

#include "erdkit/forest.hpp"
#include "erdkit/rng.hpp"

using namespace erdkit;

namespace {

std::pair<std::vector<std::vector<double>>, std::vector<double>> random_dataset(Rng& rng, std::size_t n,
                                                                                std::size_t dim) {
  std::vector<std::vector<double>> x(n, std::vector<double>(dim));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = rng.normal(0.0, 2.0);
    y[i] = rng.normal(0.0, 5.0);
  }
  return {x, y};
}

}  // namespace

TEST_CASE("single training sample yields a constant predictor", "[forest]") {
  const ForestModel model = train_forest({{1.5, -2.0}}, {7.0}, ForestConfig{});
  CHECK(predict_forest(model, {0.0, 0.0}) == 7.0);
  CHECK(predict_forest(model, {100.0, -50.0}) == 7.0);
}

TEST_CASE("fully grown single tree memorizes distinct 1-D inputs", "[forest]") {
  Rng rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
      x.push_back({static_cast<double>(i) + rng.uniform() * 0.5});
      y.push_back(rng.normal(0.0, 10.0));
    }
    const ForestModel model = train_forest(x, y, memorizing_forest_config(rep));
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(predict_forest(model, x[i]) == y[i]);
    }
  }
}

TEST_CASE("identical data and seed train bit-identical forests", "[forest]") {
  Rng rng(5);
  const auto [x, y] = random_dataset(rng, 30, 4);
  ForestConfig config;
  config.n_trees = 10;
  config.seed = 1234;
  const ForestModel a = train_forest(x, y, config);
  const ForestModel b = train_forest(x, y, config);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> probe = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    CHECK(predict_forest(a, probe) == predict_forest(b, probe));
  }
}

TEST_CASE("prediction averages the per-tree leaf values", "[forest]") {
  ForestModel model;
  model.dimension = 1;
  model.y_min = 4.0;
  model.y_max = 6.0;
  model.trees.push_back({TreeNode{-1, 0.0, -1, -1, 4.0}});
  model.trees.push_back({TreeNode{-1, 0.0, -1, -1, 6.0}});
  CHECK(predict_forest(model, {0.3}) == 5.0);
}

TEST_CASE("forest predictions stay within the training target range", "[forest]") {
  Rng rng(17);
  const auto [x, y] = random_dataset(rng, 40, 3);
  ForestConfig config;
  config.n_trees = 10;
  config.seed = 9;
  const ForestModel model = train_forest(x, y, config);
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  CHECK(model.y_min == lo);
  CHECK(model.y_max == hi);
  for (int rep = 0; rep < 1000; ++rep) {
    const double p = predict_forest(model, {rng.normal(0, 10), rng.normal(0, 10), rng.normal(0, 10)});
    CHECK(p >= lo);
    CHECK(p <= hi);
  }
}

TEST_CASE("duplicating the whole training set leaves a deterministic tree unchanged", "[forest]") {
  Rng rng(23);
  const auto [x, y] = random_dataset(rng, 15, 3);
  auto x2 = x;
  auto y2 = y;
  x2.insert(x2.end(), x.begin(), x.end());
  y2.insert(y2.end(), y.begin(), y.end());

  const ForestModel a = train_forest(x, y, memorizing_forest_config(0));
  const ForestModel b = train_forest(x2, y2, memorizing_forest_config(0));
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> probe = {rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)};
    CHECK(predict_forest(a, probe) == predict_forest(b, probe));
  }
}

TEST_CASE("feature subsampling rules stay in range and deterministic", "[forest]") {
  Rng rng(31);
  const auto [x, y] = random_dataset(rng, 25, 9);
  ForestConfig config;
  config.n_trees = 5;
  config.features_per_split = SplitFeatureRule::sqrt_rule;
  config.seed = 77;
  const ForestModel a = train_forest(x, y, config);
  const ForestModel b = train_forest(x, y, config);
  std::vector<double> probe(9, 0.25);
  CHECK(predict_forest(a, probe) == predict_forest(b, probe));

  config.features_per_split = SplitFeatureRule::fraction;
  config.feature_fraction = 0.5;
  const ForestModel c = train_forest(x, y, config);
  CHECK(std::isfinite(predict_forest(c, probe)));
}

TEST_CASE("train_forest rejects bad input", "[forest]") {
  CHECK_THROWS_WITH(train_forest({}, {}, ForestConfig{}), Catch::Matchers::ContainsSubstring("empty"));
  CHECK_THROWS_WITH(train_forest({{1.0}, {2.0, 3.0}}, {1.0, 2.0}, ForestConfig{}),
                    Catch::Matchers::ContainsSubstring("ragged"));
  CHECK_THROWS_WITH(train_forest({{1.0}}, {std::nan("")}, ForestConfig{}),
                    Catch::Matchers::ContainsSubstring("non-finite"));
  ForestConfig bad;
  bad.n_trees = 0;
  CHECK_THROWS_AS(train_forest({{1.0}}, {1.0}, bad), ValidationError);

  const ForestModel model = train_forest({{1.0}, {2.0}}, {1.0, 2.0}, ForestConfig{});
  CHECK_THROWS_WITH(predict_forest(model, {1.0, 2.0}), Catch::Matchers::ContainsSubstring("dimension"));
}

TEST_CASE("max_depth and min_samples_leaf cap tree growth", "[forest]") {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 16; ++i) {
    x.push_back({static_cast<double>(i)});
    y.push_back(static_cast<double>(i));
  }
  ForestConfig stump = memorizing_forest_config(0);
  stump.max_depth = 1;
  const ForestModel model = train_forest(x, y, stump);
  REQUIRE(model.trees.size() == 1);
  // a depth-1 tree has exactly one split and two leaves
  int leaves = 0;
  for (const auto& node : model.trees[0]) leaves += node.feature < 0 ? 1 : 0;
  CHECK(leaves == 2);
  CHECK(model.trees[0].size() == 3);

  ForestConfig wide = memorizing_forest_config(0);
  wide.min_samples_leaf = 8;
  const ForestModel fat = train_forest(x, y, wide);
  for (const auto& node : fat.trees[0]) {
    if (node.feature < 0) continue;
  }
  // every leaf of the capped tree averages >= 8 targets, so training error is nonzero
  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    max_err = std::max(max_err, std::abs(predict_forest(fat, x[i]) - y[i]));
  }
  CHECK(max_err > 0.0);
}

TEST_CASE("forest serialization round-trips prediction-exact", "[forest]") {
  Rng rng(13);
  const auto [x, y] = random_dataset(rng, 20, 3);
  ForestConfig config;
  config.n_trees = 7;
  config.seed = 3;
  const ForestModel model = train_forest(x, y, config);
  const ForestModel reloaded = forest_from_json(forest_to_json(model));
  CHECK(reloaded.config.n_trees == config.n_trees);
  CHECK(reloaded.config.seed == config.seed);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> probe = {rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5)};
    CHECK(predict_forest(model, probe) == predict_forest(reloaded, probe));
  }
  CHECK_THROWS_AS(forest_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
}
