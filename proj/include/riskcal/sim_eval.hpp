#ifndef RISKCAL_SIM_EVAL_HPP
#define RISKCAL_SIM_EVAL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "riskcal/calibration.hpp"
#include "riskcal/function_class.hpp"
#include "riskcal/matrix.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/random_forest.hpp"
#include "riskcal/stats.hpp"
#include "riskcal/tasks.hpp"

namespace riskcal {

// Heteroscedastic 1-D regression benchmark: x ~ U[0,10],
// y = sin(x)^2 + 0.1 + 0.3*(1 + x/10)*eps, and the oracle mean as the
// fitted predictor, so residual scale grows with x.
struct RegressionData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> f_hat;
};

RegressionData synth_regression_generate(std::size_t n, std::uint64_t seed);

// Synthetic blob-segmentation benchmark. Per image, scores are a logistic
// of the signed boundary distance with a per-image sharpness (the planted
// difficulty), plus pixel noise; the embedding row carries the quantities
// the per-image crossing threshold actually depends on (plus pure-noise
// coordinates), so a linear threshold function in embedding space can adapt.
struct SegmentationDataset {
  std::vector<SegmentationSample> samples;
  std::vector<double> difficulty;  // per-image sharpness, larger = harder
  Matrix embedding;                // count x embed_dim
};

SegmentationDataset synth_segmentation_generate(std::size_t count,
                                                std::size_t d1, std::size_t d2,
                                                std::uint64_t seed,
                                                std::size_t embed_dim = 12,
                                                Exec exec = Exec::Parallel);

enum class TaskKind { Regression, Segmentation };
enum class FunctionClassKind { Intercept, Groups, Embedding, RfLeaf };

struct SplitPlan {
  std::size_t train = 2000;
  std::size_t residual = 1000;
  std::size_t calibration = 9000;
  std::size_t test = 5000;
  int repetitions = 1;
  std::uint64_t seed = 0;
};

struct PcaConfig {
  bool enabled = false;
  double target_evr = 0.85;
  bool append_intercept = true;
};

struct ExperimentConfig {
  TaskKind task = TaskKind::Regression;
  FunctionClassKind function_class = FunctionClassKind::RfLeaf;
  double alpha = 0.1;
  double ridge_gamma = 0.0;
  SolverConfig solver;
  SplitPlan split;
  RfParams rf;
  PcaConfig pca;
  std::size_t group_count = 5;
  std::size_t seg_d1 = 32;
  std::size_t seg_d2 = 32;
  std::size_t embed_dim = 12;
  std::size_t tilt_direction_count = 0;
  bool cold_start = false;   // bitwise-reproducible solver mode
  bool keep_per_test = false;  // retain per-test thresholds in the record
  Exec exec = Exec::Parallel;
};

struct RepetitionRecord {
  bool ok = true;
  std::string error;
  double marginal_risk = 0.0;
  double crc_marginal_risk = 0.0;
  std::map<std::size_t, GroupRisk> per_group;
  std::vector<double> tilted_risks;
  double recall_mean = 0.0;
  double precision_mean = 0.0;
  double crc_recall_mean = 0.0;
  double crc_precision_mean = 0.0;
  double spearman_rho = 0.0;
  double spearman_p = 1.0;
  std::size_t fit_count = 0;
  std::size_t converged_count = 0;
  double max_residual = 0.0;
  // filled when keep_per_test is set
  std::vector<double> thresholds_native;
  std::vector<double> fixed_recall;  // segmentation: recall at threshold 0.5
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<RepetitionRecord> reps;
  std::map<std::string, Aggregate> aggregates;
};

Aggregate aggregate_values(const std::vector<double>& values);

// Full protocol: per repetition, regenerate data with a derived seed, fit
// the feature map on the residual split, calibrate every test point, and
// evaluate; the constant-threshold baseline runs on identical splits.
EvalReport run_experiment(const ExperimentConfig& config);

}  // namespace riskcal

#endif
