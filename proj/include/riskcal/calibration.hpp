#ifndef RISKCAL_CALIBRATION_HPP
#define RISKCAL_CALIBRATION_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskcal/matrix.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/step_loss.hpp"

namespace riskcal {

// Featurized calibration data: row i holds Phi(X_i), loss i the normalized
// loss curve of (X_i, Y_i). Immutable after construction.
class CalibrationSet {
 public:
  CalibrationSet(Matrix features, std::vector<StepLoss> losses);

  std::size_t size() const { return losses_.size(); }
  std::size_t dim() const { return features_.cols; }
  std::span<const double> feature_row(std::size_t i) const {
    return features_.row(i);
  }
  const StepLoss& loss(std::size_t i) const { return losses_[i]; }
  const Matrix& features() const { return features_; }
  const std::vector<StepLoss>& losses() const { return losses_; }

 private:
  Matrix features_;
  std::vector<StepLoss> losses_;
};

// Optional ridge penalty (gamma/2)|theta|^2. Its directional derivative
// gamma * theta.dir is what enters the guarantee correction.
class Regularizer {
 public:
  static Regularizer none() { return Regularizer(0.0); }
  static Regularizer ridge(double gamma);

  bool is_none() const { return gamma_ == 0.0; }
  double gamma() const { return gamma_; }
  double value(std::span<const double> theta) const;
  double directional(std::span<const double> theta,
                     std::span<const double> dir) const;

 private:
  explicit Regularizer(double gamma) : gamma_(gamma) {}
  double gamma_;
};

struct SolverConfig {
  // Budget of exact 1-D scans (coordinate and joint-direction updates).
  int max_iterations = 20000;
  // Stationarity tolerance; <= 0 selects 1e-6 * (1 + median feature-row norm).
  double tolerance = 0.0;
  // Starting point; empty means zeros.
  std::vector<double> warm_start;
  std::uint64_t seed = 0;
};

struct FitResult {
  std::vector<double> theta;
  // Euclidean norm of the per-coordinate clip distances of 0 to the
  // subdifferential box at theta.
  double stationarity_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

double resolve_tolerance(const CalibrationSet& calib, const SolverConfig& cfg);

// Calibration objective: mean of per-sample antiderivatives at Phi_i.theta,
// plus the worst-case test term (1-alpha)/(n+1) * Phi_test.theta, plus the
// regularizer. Convex in theta.
double objective_value(std::span<const double> theta,
                       const CalibrationSet& calib,
                       std::span<const double> test_feature, AlphaLevel alpha,
                       const Regularizer& reg, Exec exec = Exec::Parallel);

// A valid subgradient using left loss values at breakpoints.
std::vector<double> objective_subgradient(std::span<const double> theta,
                                          const CalibrationSet& calib,
                                          std::span<const double> test_feature,
                                          AlphaLevel alpha,
                                          const Regularizer& reg,
                                          Exec exec = Exec::Parallel);

// Minimizes the objective. d == 1 is an exact breakpoint scan; d > 1 runs
// exact coordinate scans plus joint-direction scans to a point whose
// subdifferential box contains zero. For d == 1 an optimum at +-infinity is
// reported as +-inf in theta (distinct outcome, not an error).
FitResult fit_threshold_function(const CalibrationSet& calib,
                                 std::span<const double> test_feature,
                                 AlphaLevel alpha, const Regularizer& reg,
                                 const SolverConfig& cfg);

// Directional first-order residuals at theta-hat for nonnegative-weight
// directions: 0 when 0 lies in [sum lambda_i*(bracket) + test + r(w)],
// otherwise the signed distance to the nearest endpoint. Directions must
// yield nonnegative weights w.Phi on every calibration row and on the test
// feature (checked).
std::vector<double> stationarity_certificate(
    const FitResult& fit, const CalibrationSet& calib,
    std::span<const double> test_feature, AlphaLevel alpha,
    const Regularizer& reg, const std::vector<std::vector<double>>& directions);

// Constant-threshold conformal risk control baseline:
// sup{u : (sum_i loss_i(u) + 1) / (n+1) <= alpha}, exact via breakpoint
// merge; +inf when nothing binds. Errors when alpha <= 1/(n+1).
double marginal_crc_threshold(const std::vector<StepLoss>& losses,
                              AlphaLevel alpha);

// Certified tilted-risk level for direction w: alpha - r(w)/mean_weight.
double guarantee_bound(AlphaLevel alpha, const Regularizer& reg,
                       const FitResult& fit, std::span<const double> direction,
                       double mean_weight);

double predict_threshold(const FitResult& fit, std::span<const double> phi);

struct BatchOptions {
  bool warm_start = true;  // chain each solve from the previous theta-hat
  Exec exec = Exec::Parallel;
};

struct BatchItem {
  FitResult fit;
  bool failed = false;
  std::string error;
};

// Independent per-test-point solves; per-item failures are flagged, not
// fatal. Cold-start mode is bitwise reproducible for a fixed seed.
std::vector<BatchItem> calibrate_batch(const CalibrationSet& calib,
                                       const Matrix& test_features,
                                       AlphaLevel alpha, const Regularizer& reg,
                                       const SolverConfig& cfg,
                                       const BatchOptions& options = {});

}  // namespace riskcal

#endif
