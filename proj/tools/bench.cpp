// Compares the serial reference path against the OpenMP path for the
// data-parallel kernels: objective reductions, batch calibration, forest
// training, and the segmentation generator.

#include <chrono>
#include <cstdio>
#include <vector>

#include "riskcal/calibration.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/random_forest.hpp"
#include "riskcal/rng.hpp"
#include "riskcal/sim_eval.hpp"

using namespace riskcal;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    f();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-24s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n",
              name, serial * 1e3, parallel * 1e3,
              parallel > 0 ? serial / parallel : 0.0);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", par::max_threads());
  Rng rng(99);

  // objective + subgradient over a large calibration set
  {
    const std::size_t n = 200000;
    Matrix phi(n, 4);
    for (auto& v : phi.data) v = rng.uniform(0.0, 1.0);
    std::vector<StepLoss> losses;
    losses.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      losses.push_back(StepLoss({rng.uniform(-1.0, 1.0)}, {0.0, 1.0}));
    CalibrationSet calib(std::move(phi), std::move(losses));
    const std::vector<double> theta{0.1, -0.2, 0.3, 0.0};
    const std::vector<double> test{0.5, 0.5, 0.5, 0.5};
    const AlphaLevel a(0.1);
    const Regularizer reg = Regularizer::none();
    volatile double sink = 0.0;
    const double ts = time_best_of(5, [&] {
      sink = objective_value(theta, calib, test, a, reg, Exec::Serial);
    });
    const double tp = time_best_of(5, [&] {
      sink = objective_value(theta, calib, test, a, reg, Exec::Parallel);
    });
    report("objective_value", ts, tp);
    std::vector<double> g;
    const double gs = time_best_of(5, [&] {
      g = objective_subgradient(theta, calib, test, a, reg, Exec::Serial);
    });
    const double gp = time_best_of(5, [&] {
      g = objective_subgradient(theta, calib, test, a, reg, Exec::Parallel);
    });
    report("objective_subgradient", gs, gp);
    (void)sink;
  }

  // cold-start batch calibration
  {
    Rng drng(7);
    const std::size_t n = 2000, d = 12, m = 200;
    Matrix phi(n, d);
    std::vector<StepLoss> losses;
    for (std::size_t i = 0; i < n; ++i) {
      phi.at(i, drng.uniform_below(d)) = 1.0;
      phi.at(i, d - 1) = 1.0;
      losses.push_back(StepLoss({drng.next_normal()}, {0.0, 1.0}));
    }
    CalibrationSet calib(std::move(phi), std::move(losses));
    Matrix tests(m, d);
    for (std::size_t r = 0; r < m; ++r) {
      tests.at(r, drng.uniform_below(d)) = 1.0;
      tests.at(r, d - 1) = 1.0;
    }
    const AlphaLevel a(0.1);
    SolverConfig cfg;
    BatchOptions serial{false, Exec::Serial};
    BatchOptions parallel{false, Exec::Parallel};
    std::vector<BatchItem> out;
    const double ts = time_best_of(3, [&] {
      out = calibrate_batch(calib, tests, a, Regularizer::none(), cfg, serial);
    });
    const double tp = time_best_of(3, [&] {
      out = calibrate_batch(calib, tests, a, Regularizer::none(), cfg, parallel);
    });
    report("calibrate_batch (cold)", ts, tp);
  }

  // forest training
  {
    Rng drng(13);
    const std::size_t n = 20000;
    Matrix feats(n, 3);
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) feats.at(i, j) = drng.next_normal();
      targets[i] = std::abs(feats.at(i, 0));
    }
    RfParams params;
    params.tree_count = 40;
    params.seed = 5;
    RandomForest f;
    const double ts =
        time_best_of(3, [&] { f = rf_fit(feats, targets, params, Exec::Serial); });
    const double tp = time_best_of(
        3, [&] { f = rf_fit(feats, targets, params, Exec::Parallel); });
    report("rf_fit (40 trees)", ts, tp);
  }

  // segmentation generator
  {
    SegmentationDataset ds;
    const double ts = time_best_of(3, [&] {
      ds = synth_segmentation_generate(200, 32, 32, 1, 12, Exec::Serial);
    });
    const double tp = time_best_of(3, [&] {
      ds = synth_segmentation_generate(200, 32, 32, 1, 12, Exec::Parallel);
    });
    report("segmentation generator", ts, tp);
  }
  return 0;
}
