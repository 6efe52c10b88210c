#include <doctest.h>

#include <cmath>

#include "riskcal/sim_eval.hpp"
#include "riskcal/stats.hpp"

using namespace riskcal;

TEST_SUITE_BEGIN("sim_eval");

TEST_CASE("regression generator") {
  const RegressionData a = synth_regression_generate(5, 123);
  const RegressionData b = synth_regression_generate(5, 123);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.f_hat == b.f_hat);

  const RegressionData big = synth_regression_generate(50000, 9);
  double lo_sum = 0.0, hi_sum = 0.0;
  std::size_t lo_n = 0, hi_n = 0;
  for (std::size_t i = 0; i < big.x.size(); ++i) {
    CHECK(big.f_hat[i] >= 0.1);
    CHECK(big.f_hat[i] <= 1.1);
    const double r = std::abs(big.y[i] - big.f_hat[i]);
    if (big.x[i] < 1.0) {
      lo_sum += r;
      ++lo_n;
    } else if (big.x[i] > 9.0) {
      hi_sum += r;
      ++hi_n;
    }
  }
  REQUIRE(lo_n > 100);
  REQUIRE(hi_n > 100);
  CHECK(lo_sum / lo_n < hi_sum / hi_n);  // noise scale grows with x
}

TEST_CASE("segmentation generator") {
  const SegmentationDataset ds = synth_segmentation_generate(500, 32, 32, 7);
  const AlphaLevel alpha(0.1);
  std::vector<double> crossing;
  for (const SegmentationSample& s : ds.samples) {
    CHECK(s.positive_count() > 0);  // never an empty mask
    for (float v : s.scores) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    crossing.push_back(recall_loss(s).crossing_threshold(alpha));
  }
  // harder images (larger sigma) admit only lower thresholds
  const SpearmanResult sp = spearman(ds.difficulty, crossing);
  CHECK(sp.rho < 0.0);
  CHECK(std::abs(sp.rho) > 0.3);

  // determinism, and serial == parallel generation
  const SegmentationDataset again = synth_segmentation_generate(500, 32, 32, 7);
  CHECK(again.samples[99].scores == ds.samples[99].scores);
  const SegmentationDataset serial =
      synth_segmentation_generate(500, 32, 32, 7, 12, Exec::Serial);
  CHECK(serial.samples[99].scores == ds.samples[99].scores);
  CHECK(serial.embedding.data == ds.embedding.data);
}

TEST_CASE("intercept regression experiment controls marginal risk") {
  ExperimentConfig cfg;
  cfg.task = TaskKind::Regression;
  cfg.function_class = FunctionClassKind::Intercept;
  cfg.alpha = 0.1;
  cfg.split = {200, 200, 800, 600, 1, 42};
  const EvalReport report = run_experiment(cfg);
  REQUIRE(report.reps.size() == 1);
  REQUIRE(report.reps[0].ok);
  const double se = std::sqrt(0.1 * 0.9 / 600.0);
  CHECK(std::abs(report.reps[0].marginal_risk - 0.1) <= 3.0 * se + 0.01);
  CHECK(report.reps[0].converged_count == report.reps[0].fit_count);
}

TEST_CASE("experiment reports are reproducible in cold-start mode") {
  ExperimentConfig cfg;
  cfg.task = TaskKind::Regression;
  cfg.function_class = FunctionClassKind::Groups;
  cfg.group_count = 3;
  cfg.split = {100, 150, 400, 200, 2, 7};
  cfg.cold_start = true;
  const EvalReport a = run_experiment(cfg);
  const EvalReport b = run_experiment(cfg);
  REQUIRE(a.reps.size() == b.reps.size());
  for (std::size_t r = 0; r < a.reps.size(); ++r) {
    CHECK(a.reps[r].marginal_risk == b.reps[r].marginal_risk);  // bitwise
    CHECK(a.reps[r].spearman_rho == b.reps[r].spearman_rho);
    CHECK(a.reps[r].max_residual == b.reps[r].max_residual);
  }
}

TEST_CASE("rf-leaf regression experiment: per-group risks stay near alpha") {
  ExperimentConfig cfg;
  cfg.task = TaskKind::Regression;
  cfg.function_class = FunctionClassKind::RfLeaf;
  cfg.alpha = 0.1;
  cfg.rf.tree_count = 6;
  cfg.rf.min_samples_leaf = 60;
  cfg.rf.max_depth = 3;
  cfg.split = {200, 400, 1500, 1200, 1, 11};
  const EvalReport report = run_experiment(cfg);
  REQUIRE(report.reps[0].ok);
  CHECK(report.reps[0].converged_count == report.reps[0].fit_count);
  CHECK(std::abs(report.reps[0].marginal_risk - 0.1) <= 0.04);
  for (const auto& [g, gr] : report.reps[0].per_group) {
    if (gr.count >= 300) CHECK(std::abs(gr.risk - 0.1) <= 0.08);
  }
}

TEST_CASE("segmentation experiment: recall control and adaptivity direction") {
  ExperimentConfig cfg;
  cfg.task = TaskKind::Segmentation;
  cfg.function_class = FunctionClassKind::Embedding;
  cfg.pca.enabled = true;
  cfg.alpha = 0.1;
  cfg.split = {1, 80, 160, 160, 3, 5};
  cfg.seg_d1 = 24;
  cfg.seg_d2 = 24;
  const EvalReport report = run_experiment(cfg);
  double recall = 0.0, prec = 0.0, crc_prec = 0.0;
  int ok = 0;
  for (const auto& rep : report.reps) {
    REQUIRE(rep.ok);
    recall += rep.recall_mean;
    prec += rep.precision_mean;
    crc_prec += rep.crc_precision_mean;
    ++ok;
  }
  recall /= ok;
  prec /= ok;
  crc_prec /= ok;
  CHECK(recall >= 0.84);
  CHECK(recall <= 0.96);
  CHECK(prec >= crc_prec - 0.02);  // adaptive thresholds shouldn't lose ground
  CHECK(report.aggregates.at("recall_mean").count == 3);
}

TEST_CASE("tilted risks with uniform weights equal the marginal risk") {
  // all-ones membership + uniform tilt + marginal mean agree exactly
  Matrix ones(6, 1);
  for (std::size_t i = 0; i < 6; ++i) ones.at(i, 0) = 1.0;
  const std::vector<double> losses{0.0, 1.0, 1.0, 0.0, 0.5, 0.5};
  const double marginal = 0.5;
  CHECK(tilted_risk(std::vector<double>(6, 1.0), losses) == marginal);
  CHECK(group_risks(ones, losses).groups.at(0).risk == marginal);
}

TEST_SUITE_END();
