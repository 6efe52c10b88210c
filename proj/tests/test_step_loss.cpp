#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/step_loss.hpp"

using riskcal::AlphaLevel;
using riskcal::Rng;
using riskcal::StepLoss;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_SUITE_BEGIN("step_loss");

TEST_CASE("left-continuous evaluation") {
  const StepLoss step({0.5}, {0.0, 1.0});
  CHECK(step(0.5) == 0.0);  // left-continuity at the breakpoint
  CHECK(step(0.6) == 1.0);
  const StepLoss flat = StepLoss::constant(0.3);
  CHECK(flat(-7.0) == 0.3);
  CHECK(step.right_limit(0.5) == 1.0);
}

TEST_CASE("antiderivative closed forms") {
  const AlphaLevel a01(0.1);
  CHECK(StepLoss::constant(0.0).antiderivative(2.0, a01) ==
        doctest::Approx(-0.2).epsilon(1e-12));

  const StepLoss step({0.0}, {0.0, 1.0});
  CHECK(step.antiderivative(1.0, a01) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(step.antiderivative(-1.0, a01) == doctest::Approx(0.1).epsilon(1e-12));
  // matches the pinball loss with the step at 0
  CHECK(step.antiderivative(1.0, a01) ==
        doctest::Approx(oracles::pinball(1.0, 0.1)));
  CHECK(step.antiderivative(-1.0, a01) ==
        doctest::Approx(oracles::pinball(-1.0, 0.1)));

  const StepLoss two({0.0, 1.0}, {0.0, 0.5, 1.0});
  const AlphaLevel a05(0.5);
  CHECK(two.antiderivative(2.0, a05) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(two.antiderivative(2.0, a05) ==
        doctest::Approx(oracles::quadrature_antiderivative(two, 0.5, 2.0))
            .epsilon(1e-8));
}

TEST_CASE("antiderivative subgradient brackets") {
  const AlphaLevel a(0.1);
  const StepLoss step({0.5}, {0.0, 1.0});
  auto sg = step.antiderivative_subgradient(0.2, a);
  CHECK(sg.lo == doctest::Approx(-0.1));
  CHECK(sg.hi == doctest::Approx(-0.1));
  sg = step.antiderivative_subgradient(0.5, a);
  CHECK(sg.lo == doctest::Approx(-0.1));
  CHECK(sg.hi == doctest::Approx(0.9));
  const StepLoss worst = StepLoss::constant(1.0);
  sg = worst.antiderivative_subgradient(123.0, a);
  CHECK(sg.lo == doctest::Approx(0.9));
  CHECK(sg.hi == doctest::Approx(0.9));
}

TEST_CASE("crossing threshold") {
  const AlphaLevel a01(0.1);
  CHECK(StepLoss({0.5}, {0.0, 1.0}).crossing_threshold(a01) == 0.5);
  CHECK(StepLoss::constant(0.0).crossing_threshold(a01) == kInf);
  CHECK(StepLoss::constant(0.5).crossing_threshold(a01) == -kInf);

  // scan the pieces by hand: values 0 and 0.2 stay within the level, the
  // piece holding 0.2 ends at its right breakpoint 2, and 0.6 exceeds it
  const StepLoss multi({1.0, 2.0, 3.0}, {0.0, 0.2, 0.6, 1.0});
  const AlphaLevel a05(0.5);
  double by_scan = -kInf;
  for (double u : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5})
    if (multi(u) <= 0.5) by_scan = std::max(by_scan, u);
  CHECK(by_scan == 2.0);
  CHECK(multi.crossing_threshold(a05) == 2.0);
}

TEST_CASE("constructor sanitization") {
  // duplicate breakpoints merge, keeping the larger value
  const StepLoss dup({1.0, 1.0}, {0.0, 0.4, 0.9});
  CHECK(dup.breakpoint_count() == 1);
  CHECK(dup.values() == std::vector<double>{0.0, 0.9});
  // zero-height jumps are dropped
  const StepLoss flatjump({1.0, 2.0}, {0.0, 0.0, 1.0});
  CHECK(flatjump.breakpoint_count() == 1);
  CHECK(flatjump.breakpoints()[0] == 2.0);
  // values just outside [0,1] clamp; far outside is an error
  const StepLoss clamped({0.0}, {-1e-10, 1.0 + 1e-10});
  CHECK(clamped.values().front() == 0.0);
  CHECK(clamped.values().back() == 1.0);
  CHECK_THROWS_AS(StepLoss({0.0}, {0.0, 1.5}), riskcal::DataError);
  CHECK_THROWS_AS(StepLoss({0.0}, {0.5, 0.4}), riskcal::DataError);
  CHECK_THROWS_AS(StepLoss({2.0, 1.0}, {0.0, 0.5, 1.0}), riskcal::DataError);
  CHECK_THROWS_AS(StepLoss({0.0}, {0.5}), riskcal::DataError);
}

TEST_CASE("alpha level validation") {
  CHECK_THROWS_AS(AlphaLevel(0.0), riskcal::ConfigError);
  CHECK_THROWS_AS(AlphaLevel(1.0), riskcal::ConfigError);
  CHECK(AlphaLevel(0.25).value() == 0.25);
}

TEST_CASE("antiderivative is convex and matches quadrature") {
  Rng rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    const StepLoss loss = oracles::random_step_loss(rng);
    const double alpha = rng.uniform(0.05, 0.95);
    const AlphaLevel a(alpha);

    double u1 = rng.uniform(-4.0, 4.0);
    double u2 = rng.uniform(-4.0, 4.0);
    double u3 = rng.uniform(-4.0, 4.0);
    if (u1 > u2) std::swap(u1, u2);
    if (u2 > u3) std::swap(u2, u3);
    if (u1 > u2) std::swap(u1, u2);
    if (u2 - u1 > 1e-9 && u3 - u2 > 1e-9) {
      const double s12 =
          (loss.antiderivative(u2, a) - loss.antiderivative(u1, a)) / (u2 - u1);
      const double s23 =
          (loss.antiderivative(u3, a) - loss.antiderivative(u2, a)) / (u3 - u2);
      CHECK(s12 <= s23 + 1e-9);
    }

    const double u = rng.uniform(-4.0, 4.0);
    const double expected = oracles::quadrature_antiderivative(loss, alpha, u);
    CHECK(std::abs(loss.antiderivative(u, a) - expected) <= 1e-8);
  }
}

TEST_CASE("subgradient brackets finite differences") {
  Rng rng(7321);
  const double h = 1e-7;
  for (int trial = 0; trial < 200; ++trial) {
    const StepLoss loss = oracles::random_step_loss(rng);
    const AlphaLevel a(rng.uniform(0.05, 0.95));
    const double u = rng.uniform(-4.0, 4.0);
    const auto sg = loss.antiderivative_subgradient(u, a);
    const double fd =
        (loss.antiderivative(u + h, a) - loss.antiderivative(u, a)) / h;
    CHECK(fd >= sg.lo - 1e-6);
    CHECK(fd <= sg.hi + 1e-6);
  }
}

TEST_CASE("single-step antiderivative equals pinball up to a constant") {
  Rng rng(90125);
  for (int trial = 0; trial < 50; ++trial) {
    const double s = rng.uniform(-2.0, 2.0);
    const double alpha = rng.uniform(0.05, 0.95);
    const StepLoss loss({s}, {0.0, 1.0});
    const AlphaLevel a(alpha);
    const double offset =
        loss.antiderivative(0.0, a) - oracles::pinball(0.0 - s, alpha);
    for (int g = 0; g < 20; ++g) {
      const double u = rng.uniform(-5.0, 5.0);
      const double diff =
          loss.antiderivative(u, a) - oracles::pinball(u - s, alpha);
      CHECK(std::abs(diff - offset) <= 1e-10);
    }
  }
}

TEST_CASE("kink tolerance widens brackets near breakpoints") {
  const StepLoss step({1.0}, {0.0, 1.0});
  const AlphaLevel a(0.1);
  const double drifted = 1.0 + 3e-16;  // a couple ulp above the kink
  const auto exact = step.antiderivative_subgradient(drifted, a);
  CHECK(exact.lo == doctest::Approx(0.9));  // exact bracket misses the jump
  const auto tol = step.antiderivative_subgradient(drifted, a, 1e-9);
  CHECK(tol.lo == doctest::Approx(-0.1));
  CHECK(tol.hi == doctest::Approx(0.9));
}

TEST_SUITE_END();
