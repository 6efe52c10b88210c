#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/tasks.hpp"

using namespace riskcal;

namespace {

SegmentationSample tiny_sample(std::vector<float> scores,
                               std::vector<std::uint8_t> mask, std::size_t d1,
                               std::size_t d2) {
  SegmentationSample s;
  s.d1 = d1;
  s.d2 = d2;
  s.scores = std::move(scores);
  s.mask = std::move(mask);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("tasks");

TEST_CASE("interval loss breakpoints") {
  const StepLoss zero = interval_loss(0.0, 0.0);
  CHECK(zero.breakpoints() == std::vector<double>{0.0});
  CHECK(zero(-0.5) == 0.0);  // any positive width covers a zero residual

  const StepLoss offs = interval_loss(1.0, 3.0);
  CHECK(offs.breakpoints() == std::vector<double>{-2.0});

  CHECK_THROWS_AS(interval_loss(0.0, std::nan("")), DataError);
}

TEST_CASE("interval coverage consistency") {
  Rng rng(4242);
  for (int t = 0; t < 200; ++t) {
    const double p = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    const StepLoss loss = interval_loss(p, y);
    const double w = rng.uniform(0.0, 4.0);
    const IntervalSet set = apply_threshold(p, w);
    const double expect = set.covers(y) ? 0.0 : 1.0;
    CHECK(loss(-w) == expect);
  }
  // at w exactly |y - p| the closed interval covers its endpoint
  const StepLoss edge = interval_loss(1.0, 2.5);
  CHECK(edge(-1.5) == 0.0);
  CHECK(apply_threshold(1.0, 1.5).covers(2.5));
  // just below, coverage fails
  CHECK(edge(-1.5 + 1e-9) == 1.0);
}

TEST_CASE("interval apply_threshold") {
  const IntervalSet s = apply_threshold(2.0, 0.5);
  CHECK(s.lo == 1.5);
  CHECK(s.hi == 2.5);
  const IntervalSet collapsed = apply_threshold(2.0, -3.0);
  CHECK(collapsed.lo == 2.0);
  CHECK(collapsed.hi == 2.0);
}

TEST_CASE("recall loss by hand") {
  // two positive pixels; count the scores strictly below each threshold
  // (binary-exact values so the float scores stay exact as doubles)
  const auto s = tiny_sample({0.25f, 0.75f, 0.9f, 0.1f}, {1, 1, 0, 0}, 2, 2);
  const StepLoss loss = recall_loss(s);
  CHECK(loss(0.25) == 0.0);
  CHECK(loss(0.5) == 0.5);
  CHECK(loss(0.75) == 0.5);
  CHECK(loss(0.76) == 1.0);

  // all positive scores identical: a single breakpoint
  const auto ones = tiny_sample({1.0f, 1.0f, 0.2f, 0.2f}, {1, 1, 0, 0}, 2, 2);
  const StepLoss lones = recall_loss(ones);
  CHECK(lones.breakpoint_count() == 1);
  CHECK(lones.breakpoints()[0] == 1.0);
  CHECK(lones(1.0) == 0.0);

  // full mask with distinct scores: values are j/|y|
  const auto full = tiny_sample({0.1f, 0.2f, 0.3f, 0.4f}, {1, 1, 1, 1}, 2, 2);
  const StepLoss lfull = recall_loss(full);
  CHECK(lfull.breakpoint_count() == 4);
  for (std::size_t j = 0; j < lfull.values().size(); ++j)
    CHECK(lfull.values()[j] ==
          doctest::Approx(static_cast<double>(j) / 4.0).epsilon(1e-15));

  const auto empty = tiny_sample({0.5f, 0.5f, 0.5f, 0.5f}, {0, 0, 0, 0}, 2, 2);
  CHECK_THROWS_AS(recall_loss(empty), DataError);
}

TEST_CASE("mask metrics") {
  const std::vector<std::uint8_t> truth{1, 1, 0, 0};
  MaskMetrics m = mask_metrics(truth, truth);
  CHECK(m.recall == 1.0);
  CHECK(m.precision == 1.0);

  m = mask_metrics({1, 1, 1, 1}, truth);
  CHECK(m.recall == 1.0);
  CHECK(m.precision == 0.5);

  m = mask_metrics({0, 0, 1, 1}, truth);  // disjoint
  CHECK(m.recall == 0.0);
  CHECK(m.precision == 0.0);

  m = mask_metrics({0, 0, 0, 0}, truth);  // empty prediction convention
  CHECK(m.precision == 1.0);

  CHECK_THROWS_AS(mask_metrics({1, 0}, truth), DataError);
}

TEST_CASE("mask apply_threshold extremes") {
  const auto s = tiny_sample({0.1f, 0.6f, 0.4f, 0.9f}, {0, 1, 1, 0}, 2, 2);
  const auto all = apply_threshold(s, 0.0);
  for (auto v : all) CHECK(v == 1);
  const auto none = apply_threshold(s, 0.95);  // above every score
  for (auto v : none) CHECK(v == 0);
  // thresholds above 1 clamp to 1 and keep score-1 pixels
  const auto sc1 = tiny_sample({1.0f, 0.5f, 0.5f, 0.5f}, {1, 0, 0, 0}, 2, 2);
  CHECK(apply_threshold(sc1, 7.0)[0] == 1);
}

TEST_CASE("recall loss agrees with mask metrics at every threshold") {
  Rng rng(991);
  for (int t = 0; t < 50; ++t) {
    SegmentationSample s;
    s.d1 = 4;
    s.d2 = 4;
    s.scores.resize(16);
    s.mask.resize(16);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      s.scores[i] = static_cast<float>(rng.next_double());
      s.mask[i] = rng.next_double() < 0.4 ? 1 : 0;
      pos += s.mask[i];
    }
    if (pos == 0) s.mask[0] = 1;
    const StepLoss loss = recall_loss(s);
    for (int g = 0; g < 20; ++g) {
      const double u = rng.next_double();
      const MaskMetrics m = mask_metrics(apply_threshold(s, u), s.mask);
      CHECK(loss(u) == 1.0 - m.recall);  // exact, not approximate
    }
    // monotone nesting: raising the threshold only removes pixels
    const double u1 = 0.3, u2 = 0.7;
    const auto m1 = apply_threshold(s, u1);
    const auto m2 = apply_threshold(s, u2);
    for (std::size_t i = 0; i < 16; ++i)
      if (m2[i]) CHECK(m1[i] == 1);
  }
}

TEST_CASE("orientation round trip") {
  CHECK(to_native(Orientation::GrowingSets, -2.0) == 2.0);
  CHECK(from_native(Orientation::GrowingSets, 2.0) == -2.0);
  CHECK(to_native(Orientation::ShrinkingSets, 0.3) == 0.3);
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const double u = rng.uniform(-5.0, 5.0);
    for (auto o : {Orientation::GrowingSets, Orientation::ShrinkingSets})
      CHECK(from_native(o, to_native(o, u)) == u);
  }
}

TEST_SUITE_END();
