#ifndef RISKCAL_STEP_LOSS_HPP
#define RISKCAL_STEP_LOSS_HPP

#include <cstddef>
#include <vector>

namespace riskcal {

// Target risk level, in (0, 1).
class AlphaLevel {
 public:
  explicit AlphaLevel(double alpha);
  double value() const { return alpha_; }

 private:
  double alpha_;
};

// Two-sided derivative bracket [lo, hi] of the loss antiderivative at a
// point; lo == hi away from breakpoints.
struct SubgradientBracket {
  double lo = 0.0;
  double hi = 0.0;
};

// Left-continuous nondecreasing step function with values in [0, 1]: the
// exact per-sample loss curve in the normalized parameterization where a
// larger parameter always means a larger loss (smaller prediction set).
//
// For breakpoints b_1 < ... < b_k and values v_0 <= ... <= v_k,
//   f(u) = v_0 for u <= b_1,   f(u) = v_j for u in (b_j, b_{j+1}],
//   f(u) = v_k for u > b_k.
// k == 0 is a constant loss.
class StepLoss {
 public:
  // values.size() must equal breakpoints.size() + 1. Breakpoints must be
  // nondecreasing; duplicates are merged (keeping the larger value) and
  // zero-height jumps dropped. Values must be nondecreasing and inside
  // [-1e-9, 1+1e-9]; they are clamped into [0, 1].
  StepLoss(std::vector<double> breakpoints, std::vector<double> values);

  static StepLoss constant(double value);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t breakpoint_count() const { return breakpoints_.size(); }
  double min_value() const { return values_.front(); }
  double max_value() const { return values_.back(); }

  // Left-continuous evaluation.
  double operator()(double u) const;
  // Right limit f(u+).
  double right_limit(double u) const;

  // Antiderivative of (f - alpha), anchored at the first breakpoint (at 0
  // for a constant loss). Convex piecewise-linear; the anchor only shifts it
  // by a constant, which no downstream argmin depends on.
  double antiderivative(double u, AlphaLevel alpha) const;

  // Subdifferential of the antiderivative at u: [f(u) - alpha, f(u+) - alpha].
  // A positive kink_tol widens the detection window so points a few ulp away
  // from a breakpoint (solver landings) still report the full bracket.
  SubgradientBracket antiderivative_subgradient(double u, AlphaLevel alpha,
                                                double kink_tol = 0.0) const;

  // sup{u : f(u) <= alpha}; +infinity when the loss never exceeds alpha,
  // -infinity when even the lowest piece does.
  double crossing_threshold(AlphaLevel alpha) const;

 private:
  StepLoss() = default;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

}  // namespace riskcal

#endif
