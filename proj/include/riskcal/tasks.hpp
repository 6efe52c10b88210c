#ifndef RISKCAL_TASKS_HPP
#define RISKCAL_TASKS_HPP

#include <cstdint>
#include <vector>

#include "riskcal/step_loss.hpp"

namespace riskcal {

// How a task's native parameter maps onto the normalized one.
// GrowingSets: sets grow with the native parameter (interval width), so the
// normalized parameter is its negation. ShrinkingSets: sets shrink as the
// native parameter grows (score threshold), identity map.
enum class Orientation { GrowingSets, ShrinkingSets };

inline double to_native(Orientation o, double u) {
  return o == Orientation::GrowingSets ? -u : u;
}
inline double from_native(Orientation o, double t) {
  return o == Orientation::GrowingSets ? -t : t;
}

// Regression intervals [f(x) +- w]. Normalized parameter u = -w.
struct IntervalTask {
  std::vector<double> predictions;
  std::vector<double> labels;
  static constexpr Orientation orientation = Orientation::GrowingSets;
};

// One-step miscoverage loss of the closed interval [prediction +- w] in
// normalized coordinates: breakpoint at -|label - prediction|, values (0, 1).
StepLoss interval_loss(double prediction, double label);

struct IntervalSet {
  double lo = 0.0;
  double hi = 0.0;
  bool covers(double y) const { return y >= lo && y <= hi; }
};

// Interval at native width w (negative widths collapse to a point).
IntervalSet apply_threshold(double prediction, double width_native);

// Binary segmentation sample: sigmoid scores in [0, 1] plus ground-truth
// mask, both d1 x d2 row-major. Thresholding keeps pixels with score >= t.
struct SegmentationSample {
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::vector<float> scores;
  std::vector<std::uint8_t> mask;
  static constexpr Orientation orientation = Orientation::ShrinkingSets;

  std::size_t pixel_count() const { return d1 * d2; }
  std::size_t positive_count() const;
};

// Recall loss 1 - |y and C_u| / |y| as a function of the score threshold u:
// left-continuous steps at the distinct positive-pixel scores, with values
// k/|y|. Errors on an empty mask.
StepLoss recall_loss(const SegmentationSample& sample);

// Predicted mask 1{score >= t}; t is clamped into [0, 1].
std::vector<std::uint8_t> apply_threshold(const SegmentationSample& sample,
                                          double threshold_native);

struct MaskMetrics {
  double recall = 0.0;
  double precision = 0.0;  // = 1 when the prediction is empty
};

MaskMetrics mask_metrics(const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth);

}  // namespace riskcal

#endif
