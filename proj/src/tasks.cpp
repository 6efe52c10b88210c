#include "riskcal/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "riskcal/errors.hpp"

namespace riskcal {

StepLoss interval_loss(double prediction, double label) {
  if (!std::isfinite(prediction) || !std::isfinite(label))
    throw DataError("interval_loss: non-finite input");
  return StepLoss({-std::abs(label - prediction)}, {0.0, 1.0});
}

IntervalSet apply_threshold(double prediction, double width_native) {
  const double w = std::max(width_native, 0.0);
  return {prediction - w, prediction + w};
}

std::size_t SegmentationSample::positive_count() const {
  std::size_t c = 0;
  for (std::uint8_t m : mask) c += m != 0;
  return c;
}

StepLoss recall_loss(const SegmentationSample& sample) {
  if (sample.scores.size() != sample.pixel_count() ||
      sample.mask.size() != sample.pixel_count())
    throw DataError("recall_loss: score/mask shape mismatch");
  std::vector<double> positive_scores;
  positive_scores.reserve(sample.mask.size());
  for (std::size_t i = 0; i < sample.mask.size(); ++i)
    if (sample.mask[i]) positive_scores.push_back(sample.scores[i]);
  if (positive_scores.empty())
    throw DataError("recall_loss: empty ground-truth mask");
  std::sort(positive_scores.begin(), positive_scores.end());

  const std::size_t total = positive_scores.size();
  std::vector<double> breakpoints;
  std::vector<double> values{0.0};
  std::size_t below = 0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && positive_scores[j] == positive_scores[i]) ++j;
    breakpoints.push_back(positive_scores[i]);
    below += j - i;  // pixels at this score count as "below" once u passes it
    // 1 - recall, written exactly as mask_metrics computes recall, so the
    // two agree bit-for-bit at every threshold.
    values.push_back(1.0 - static_cast<double>(total - below) /
                               static_cast<double>(total));
    i = j;
  }
  return StepLoss(std::move(breakpoints), std::move(values));
}

std::vector<std::uint8_t> apply_threshold(const SegmentationSample& sample,
                                          double threshold_native) {
  const double t = std::min(1.0, std::max(0.0, threshold_native));
  std::vector<std::uint8_t> out(sample.pixel_count(), 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = sample.scores[i] >= t ? 1 : 0;
  return out;
}

MaskMetrics mask_metrics(const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth) {
  if (predicted.size() != truth.size())
    throw DataError("mask_metrics: shape mismatch");
  std::size_t tp = 0, pred = 0, pos = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    tp += p && t;
    pred += p;
    pos += t;
  }
  if (pos == 0) throw DataError("mask_metrics: empty ground-truth mask");
  MaskMetrics m;
  m.recall = static_cast<double>(tp) / static_cast<double>(pos);
  m.precision =
      pred == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pred);
  return m;
}

}  // namespace riskcal
