#include "riskcal/step_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskcal/errors.hpp"

namespace riskcal {

namespace {
constexpr double kValueSlack = 1e-9;  // accepted rounding outside [0, 1]
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

AlphaLevel::AlphaLevel(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie strictly inside (0, 1)");
}

StepLoss::StepLoss(std::vector<double> breakpoints, std::vector<double> values) {
  if (values.size() != breakpoints.size() + 1)
    throw DataError("StepLoss: need one more value than breakpoints");
  for (double b : breakpoints)
    if (!std::isfinite(b)) throw DataError("StepLoss: non-finite breakpoint");
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    if (breakpoints[i] > breakpoints[i + 1])
      throw DataError("StepLoss: breakpoints must be nondecreasing");
  for (double v : values) {
    if (!(v >= -kValueSlack && v <= 1.0 + kValueSlack))
      throw DataError("StepLoss: value outside [0, 1]");
  }
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    if (values[i] > values[i + 1])
      throw DataError("StepLoss: values must be nondecreasing");

  for (double& v : values) v = std::min(1.0, std::max(0.0, v));

  // Merge duplicate breakpoints (the larger value wins, which for monotone
  // values is the later one) and drop zero-height jumps.
  breakpoints_.reserve(breakpoints.size());
  values_.reserve(values.size());
  values_.push_back(values[0]);
  for (std::size_t j = 0; j < breakpoints.size(); ++j) {
    const double b = breakpoints[j];
    const double v = values[j + 1];
    if (!breakpoints_.empty() && breakpoints_.back() == b) {
      values_.back() = std::max(values_.back(), v);
      continue;
    }
    if (v == values_.back()) continue;  // no jump here
    breakpoints_.push_back(b);
    values_.push_back(v);
  }
}

StepLoss StepLoss::constant(double value) { return StepLoss({}, {value}); }

double StepLoss::operator()(double u) const {
  // value index = number of breakpoints strictly below u
  const auto it =
      std::lower_bound(breakpoints_.begin(), breakpoints_.end(), u);
  return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double StepLoss::right_limit(double u) const {
  const auto it =
      std::upper_bound(breakpoints_.begin(), breakpoints_.end(), u);
  return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double StepLoss::antiderivative(double u, AlphaLevel alpha) const {
  const double a = alpha.value();
  if (breakpoints_.empty()) return u * (values_[0] - a);
  const double anchor = breakpoints_[0];
  const auto it =
      std::lower_bound(breakpoints_.begin(), breakpoints_.end(), u);
  const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin());
  if (j == 0) return (u - anchor) * (values_[0] - a);
  double acc = 0.0;
  for (std::size_t m = 1; m < j; ++m)
    acc += (breakpoints_[m] - breakpoints_[m - 1]) * (values_[m] - a);
  acc += (u - breakpoints_[j - 1]) * (values_[j] - a);
  return acc;
}

SubgradientBracket StepLoss::antiderivative_subgradient(double u,
                                                        AlphaLevel alpha,
                                                        double kink_tol) const {
  const double a = alpha.value();
  if (kink_tol == 0.0) return {(*this)(u)-a, right_limit(u) - a};
  const double lo_val = (*this)(u - kink_tol);
  const double hi_val = right_limit(u + kink_tol);
  return {lo_val - a, hi_val - a};
}

double StepLoss::crossing_threshold(AlphaLevel alpha) const {
  const double a = alpha.value();
  if (values_.back() <= a) return kInf;
  if (values_.front() > a) return -kInf;
  // smallest piece index whose value exceeds alpha; the previous piece ends
  // exactly at its breakpoint (attained by left-continuity)
  const auto it = std::upper_bound(values_.begin(), values_.end(), a);
  const std::size_t j = static_cast<std::size_t>(it - values_.begin());
  return breakpoints_[j - 1];
}

}  // namespace riskcal
