// Test-only oracles, independent of the library implementation paths they
// check.
#ifndef RISKCAL_TESTS_ORACLES_HPP
#define RISKCAL_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "riskcal/rng.hpp"
#include "riskcal/step_loss.hpp"

namespace oracles {

// Midpoint quadrature of (loss - alpha) from the anchor (first breakpoint,
// or 0 for constant losses) to u, on a grid refining every breakpoint.
// Midpoints never touch a discontinuity, so this is exact for step
// functions up to rounding.
inline double quadrature_antiderivative(const riskcal::StepLoss& loss,
                                        double alpha, double u,
                                        int steps_per_segment = 64) {
  const auto& bps = loss.breakpoints();
  const double anchor = bps.empty() ? 0.0 : bps.front();
  const double lo = std::min(anchor, u);
  const double hi = std::max(anchor, u);
  std::vector<double> knots{lo, hi};
  for (double b : bps)
    if (b > lo && b < hi) knots.push_back(b);
  std::sort(knots.begin(), knots.end());
  double integral = 0.0;
  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    const double a = knots[s], b = knots[s + 1];
    const double h = (b - a) / steps_per_segment;
    for (int k = 0; k < steps_per_segment; ++k)
      integral += h * (loss(a + (k + 0.5) * h) - alpha);
  }
  return u >= anchor ? integral : -integral;
}

// Pinball loss at level 1-alpha: slope -alpha left of 0, 1-alpha right.
inline double pinball(double t, double alpha) {
  return t >= 0.0 ? (1.0 - alpha) * t : -alpha * t;
}

// Kahan-compensated dot product.
inline double kahan_dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double y = a[i] * b[i] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

// k-th smallest (1-based); returns +infinity when k exceeds the sample.
inline double order_statistic(std::vector<double> v, std::size_t k) {
  if (k == 0 || k > v.size())
    return std::numeric_limits<double>::infinity();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   v.end());
  return v[k - 1];
}

// Random coercive step loss: like random_step_loss but pinned to start at 0
// and end at 1, so objectives built from it are bounded below.
inline riskcal::StepLoss random_full_step_loss(riskcal::Rng& rng,
                                               int max_k = 3) {
  const int k = 1 + static_cast<int>(rng.uniform_below(
      static_cast<std::uint64_t>(max_k)));
  std::vector<double> bps(static_cast<std::size_t>(k));
  for (double& b : bps) b = rng.uniform(-3.0, 3.0);
  std::sort(bps.begin(), bps.end());
  std::vector<double> vals(static_cast<std::size_t>(k) + 1);
  for (double& v : vals) v = rng.next_double();
  std::sort(vals.begin(), vals.end());
  vals.front() = 0.0;
  vals.back() = 1.0;
  return riskcal::StepLoss(std::move(bps), std::move(vals));
}

// Random valid step loss: up to max_k breakpoints in [-3, 3], nondecreasing
// values in [0, 1].
inline riskcal::StepLoss random_step_loss(riskcal::Rng& rng, int max_k = 6) {
  const int k = static_cast<int>(rng.uniform_below(
      static_cast<std::uint64_t>(max_k) + 1));
  std::vector<double> bps(static_cast<std::size_t>(k));
  for (double& b : bps) b = rng.uniform(-3.0, 3.0);
  std::sort(bps.begin(), bps.end());
  std::vector<double> vals(static_cast<std::size_t>(k) + 1);
  for (double& v : vals) v = rng.next_double();
  std::sort(vals.begin(), vals.end());
  return riskcal::StepLoss(std::move(bps), std::move(vals));
}

// Exhaustive best split by SSE over every feature and every threshold
// midpoint.
struct BruteSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double sse = 0.0;
};

inline BruteSplit brute_force_split(const std::vector<std::vector<double>>& x,
                                    const std::vector<double>& y,
                                    int min_leaf) {
  BruteSplit best;
  const int p = static_cast<int>(x.size());
  const int n = static_cast<int>(y.size());
  for (int f = 0; f < p; ++f) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return x[static_cast<std::size_t>(f)][static_cast<std::size_t>(a)] <
             x[static_cast<std::size_t>(f)][static_cast<std::size_t>(b)];
    });
    for (int k = min_leaf; k <= n - min_leaf; ++k) {
      const double xl = x[static_cast<std::size_t>(f)][static_cast<std::size_t>(idx[static_cast<std::size_t>(k - 1)])];
      const double xr = x[static_cast<std::size_t>(f)][static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      if (xl == xr) continue;
      const double thr = 0.5 * (xl + xr);
      double sl = 0.0, sr = 0.0;
      int cl = 0, cr = 0;
      for (int i = 0; i < n; ++i) {
        if (x[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)] <= thr) {
          sl += y[static_cast<std::size_t>(i)];
          ++cl;
        } else {
          sr += y[static_cast<std::size_t>(i)];
          ++cr;
        }
      }
      double sse = 0.0;
      const double ml = sl / cl, mr = sr / cr;
      for (int i = 0; i < n; ++i) {
        const double m =
            x[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)] <= thr ? ml : mr;
        const double dlt = y[static_cast<std::size_t>(i)] - m;
        sse += dlt * dlt;
      }
      if (!best.found || sse < best.sse) {
        best.found = true;
        best.feature = f;
        best.threshold = thr;
        best.sse = sse;
      }
    }
  }
  return best;
}

}  // namespace oracles

#endif
