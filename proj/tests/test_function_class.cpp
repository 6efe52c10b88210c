#include <doctest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/function_class.hpp"
#include "riskcal/pca.hpp"
#include "riskcal/random_forest.hpp"

using namespace riskcal;

TEST_SUITE_BEGIN("function_class");

TEST_CASE("intercept and group maps") {
  InterceptMap intercept;
  const std::vector<double> x{5.0, -2.0};
  CHECK(intercept.featurize(x) == std::vector<double>{1.0});

  // three disjoint bins on feature 0; x in the middle bin
  const GroupIndicatorMap groups =
      GroupIndicatorMap::binned(0, {0.0, 1.0});
  CHECK(groups.featurize(std::vector<double>{0.5}) ==
        std::vector<double>{0.0, 1.0, 0.0});
  CHECK(groups.featurize(std::vector<double>{-1.0}) ==
        std::vector<double>{1.0, 0.0, 0.0});
  // bin edges belong to the lower bin
  CHECK(groups.featurize(std::vector<double>{0.0}) ==
        std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("featurize is deterministic") {
  Rng rng(31);
  Matrix feats(300, 2);
  std::vector<double> targets(300);
  for (std::size_t i = 0; i < 300; ++i) {
    feats.at(i, 0) = rng.next_normal();
    feats.at(i, 1) = rng.next_normal();
    targets[i] = std::abs(feats.at(i, 0));
  }
  RfParams params;
  params.tree_count = 5;
  params.min_samples_leaf = 20;
  params.seed = 99;
  auto forest = std::make_shared<RandomForest>(rf_fit(feats, targets, params));
  RfLeafMap map(forest);
  const std::vector<double> x{0.3, -0.7};
  const auto a = map.featurize(x);
  const auto b = map.featurize(x);
  CHECK(a == b);  // bitwise
}

TEST_CASE("rf_fit recovers a planted split") {
  Rng rng(32);
  const std::size_t n = 100;
  Matrix feats(n, 1);
  std::vector<double> targets(n);
  std::vector<std::vector<double>> cols(1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    feats.at(i, 0) = x;
    targets[i] = (x > 0.0 ? 1.0 : 0.0) + 0.01 * rng.next_normal() + 0.05;
    cols[0].push_back(x);
  }
  RfParams params;
  params.tree_count = 1;
  params.max_depth = 1;
  params.min_samples_leaf = 10;
  params.bootstrap = false;  // so the brute-force oracle sees the same rows
  const RandomForest forest = rf_fit(feats, targets, params);
  REQUIRE(forest.leaf_count() == 2);
  const auto& root = forest.trees()[0].nodes[0];
  const auto oracle = oracles::brute_force_split(cols, targets, 10);
  REQUIRE(oracle.found);
  CHECK(root.threshold == doctest::Approx(oracle.threshold).epsilon(1e-12));
  CHECK(std::abs(root.threshold) <= 0.2);
}

TEST_CASE("rf_fit structure") {
  Rng rng(33);
  Matrix feats(200, 3);
  std::vector<double> targets(200);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 3; ++j) feats.at(i, j) = rng.next_normal();
    targets[i] = std::abs(feats.at(i, 0));
  }
  RfParams params;
  params.tree_count = 5;
  params.min_samples_leaf = 25;
  const RandomForest forest = rf_fit(feats, targets, params);
  CHECK(forest.tree_count() == 5);

  // constant targets: every tree collapses to a stump
  std::vector<double> flat(200, 0.7);
  const RandomForest stumps = rf_fit(feats, flat, params);
  CHECK(stumps.leaf_count() == 5);
  std::vector<double> emb(static_cast<std::size_t>(stumps.leaf_count()));
  stumps.leaf_embedding(std::vector<double>{0.0, 0.0, 0.0}, emb);
  for (double v : emb) CHECK(v == 1.0);

  // depth-1 single tree: left leaf then right leaf
  RfParams shallow;
  shallow.tree_count = 1;
  shallow.max_depth = 1;
  shallow.min_samples_leaf = 25;
  shallow.bootstrap = false;
  const RandomForest one = rf_fit(feats, targets, shallow);
  if (one.leaf_count() == 2) {
    const double thr = one.trees()[0].nodes[0].threshold;
    const int f = one.trees()[0].nodes[0].feature;
    std::vector<double> left{0.0, 0.0, 0.0};
    left[static_cast<std::size_t>(f)] = thr - 1.0;
    std::vector<double> e(2);
    one.leaf_embedding(left, e);
    CHECK(e[0] == 1.0);
    CHECK(e[1] == 0.0);
  }

  CHECK_THROWS_AS(rf_fit(feats, std::vector<double>(200, -1.0), params),
                  DataError);  // negative residual targets
  CHECK_THROWS_AS(rf_fit(Matrix(10, 1), std::vector<double>(10, 0.0), params),
                  DataError);  // too few rows for min_samples_leaf
}

TEST_CASE("leaf embedding popcount equals tree count") {
  Rng rng(34);
  Matrix feats(500, 2);
  std::vector<double> targets(500);
  for (std::size_t i = 0; i < 500; ++i) {
    feats.at(i, 0) = rng.next_normal();
    feats.at(i, 1) = rng.next_normal();
    targets[i] = std::abs(feats.at(i, 0) * feats.at(i, 1));
  }
  RfParams params;
  params.tree_count = 10;
  params.min_samples_leaf = 30;
  params.seed = 7;
  const RandomForest forest = rf_fit(feats, targets, params);
  std::vector<double> emb(static_cast<std::size_t>(forest.leaf_count()));
  for (int t = 0; t < 1000; ++t) {
    const std::vector<double> x{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    forest.leaf_embedding(x, emb);
    int pop = 0;
    for (double v : emb) pop += v == 1.0;
    CHECK(pop == forest.tree_count());
    // structural cross-check: walking each tree independently gives the ones
    const auto leaves = forest.leaves(x);
    for (int id : leaves) CHECK(emb[static_cast<std::size_t>(id)] == 1.0);
  }
}

TEST_CASE("forest beats the global mean on heteroscedastic residuals") {
  Rng rng(35);
  const std::size_t n = 2000;
  Matrix feats(n, 1);
  std::vector<double> targets(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    feats.at(i, 0) = rng.uniform(-2.0, 2.0);
    targets[i] = std::abs(feats.at(i, 0)) * std::abs(rng.next_normal());
    mean += targets[i];
  }
  mean /= static_cast<double>(n);
  RfParams params;
  params.seed = 3;
  const RandomForest forest = rf_fit(feats, targets, params);
  double mse_forest = 0.0, mse_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = forest.predict_mean(feats.row(i));
    mse_forest += (pred - targets[i]) * (pred - targets[i]);
    mse_mean += (mean - targets[i]) * (mean - targets[i]);
  }
  CHECK(mse_forest < 0.9 * mse_mean);
}

TEST_CASE("forest json round trip") {
  Rng rng(36);
  Matrix feats(200, 2);
  std::vector<double> targets(200);
  for (std::size_t i = 0; i < 200; ++i) {
    feats.at(i, 0) = rng.next_normal();
    feats.at(i, 1) = rng.next_normal();
    targets[i] = std::abs(feats.at(i, 0));
  }
  RfParams params;
  params.tree_count = 4;
  params.min_samples_leaf = 20;
  params.seed = 11;
  const RandomForest forest = rf_fit(feats, targets, params);
  const RandomForest reloaded = RandomForest::from_json(forest.to_json());
  CHECK(reloaded.leaf_count() == forest.leaf_count());
  std::vector<double> e1(static_cast<std::size_t>(forest.leaf_count()));
  std::vector<double> e2(e1.size());
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> x{rng.next_normal(), rng.next_normal()};
    forest.leaf_embedding(x, e1);
    reloaded.leaf_embedding(x, e2);
    CHECK(e1 == e2);
  }
  CHECK_THROWS_AS(RandomForest::from_json("{\"format\":\"other\"}"), DataError);
  CHECK_THROWS_AS(RandomForest::from_json("not json"), DataError);
}

TEST_CASE("pca retains the right component count") {
  Rng rng(37);
  // data on a line in 3-D: one component explains everything
  Matrix line(100, 3);
  for (std::size_t i = 0; i < 100; ++i) {
    const double t = rng.next_normal();
    line.at(i, 0) = t;
    line.at(i, 1) = 2.0 * t;
    line.at(i, 2) = -t;
  }
  const PcaModel one = pca_fit(line, 0.85);
  CHECK(one.retained == 1);

  // isotropic 2-D: each axis carries about half the variance
  Matrix iso(4000, 2);
  for (std::size_t i = 0; i < 4000; ++i) {
    iso.at(i, 0) = rng.next_normal();
    iso.at(i, 1) = rng.next_normal();
  }
  const PcaModel two = pca_fit(iso, 0.85);
  CHECK(two.retained == 2);
  CHECK(two.explained_variance_ratio[0] == doctest::Approx(0.5).epsilon(0.1));

  // projecting the mean gives the zero vector
  std::vector<double> mean(2, 0.0);
  for (std::size_t i = 0; i < 4000; ++i) {
    mean[0] += iso.at(i, 0) / 4000.0;
    mean[1] += iso.at(i, 1) / 4000.0;
  }
  std::vector<double> proj(two.retained);
  pca_project(two, mean, proj);
  for (double v : proj) CHECK(std::abs(v) <= 1e-9);

  CHECK_THROWS_AS(pca_fit(Matrix(50, 3), 0.85), DataError);  // zero variance
}

TEST_CASE("pca orthonormality and reconstruction") {
  Rng rng(38);
  Matrix data(300, 4);
  for (auto& v : data.data) v = rng.next_normal();
  const PcaModel model = pca_fit(data, 1.0);
  // rows orthonormal
  for (std::size_t r = 0; r < model.retained; ++r) {
    for (std::size_t s = r; s < model.retained; ++s) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 4; ++j)
        dot += model.components[r * 4 + j] * model.components[s * 4 + j];
      CHECK(std::abs(dot - (r == s ? 1.0 : 0.0)) <= 1e-8);
    }
  }
  // full-rank projection reconstructs centered data
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = rng.uniform_below(300);
    std::vector<double> proj(model.retained);
    pca_project(model, data.row(i), proj);
    for (std::size_t j = 0; j < 4; ++j) {
      double rec = 0.0;
      for (std::size_t r = 0; r < model.retained; ++r)
        rec += model.components[r * 4 + j] * proj[r];
      CHECK(std::abs(rec - (data.at(i, j) - model.mean[j])) <= 1e-6);
    }
  }
}

TEST_CASE("linear embedding map") {
  Rng rng(39);
  Matrix data(200, 3);
  for (auto& v : data.data) v = rng.next_normal();
  const LinearEmbeddingMap plain(3, std::nullopt, false);
  CHECK(plain.dim() == 3);
  const std::vector<double> x{1.0, 2.0, 3.0};
  CHECK(plain.featurize(x) == x);

  LinearEmbeddingMap with_intercept(3, pca_fit(data, 1.0), true);
  CHECK(with_intercept.dim() == 4);
  const auto out = with_intercept.featurize(x);
  CHECK(out.back() == 1.0);
  CHECK_THROWS_AS(plain.featurize(std::vector<double>{1.0}), DataError);
}

TEST_SUITE_END();
