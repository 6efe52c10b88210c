#include "riskcal/sim_eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "riskcal/errors.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

namespace {

// Two-pass chamfer distance (weights 1, sqrt(2)) to the nonzero set.
std::vector<double> chamfer_distance(const std::vector<std::uint8_t>& set,
                                     std::size_t d1, std::size_t d2) {
  constexpr double kBig = 1e18;
  const double diag = std::sqrt(2.0);
  std::vector<double> dist(d1 * d2);
  for (std::size_t i = 0; i < dist.size(); ++i)
    dist[i] = set[i] ? 0.0 : kBig;
  auto at = [&](std::size_t r, std::size_t c) -> double& {
    return dist[r * d2 + c];
  };
  for (std::size_t r = 0; r < d1; ++r) {
    for (std::size_t c = 0; c < d2; ++c) {
      double best = at(r, c);
      if (c > 0) best = std::min(best, at(r, c - 1) + 1.0);
      if (r > 0) {
        best = std::min(best, at(r - 1, c) + 1.0);
        if (c > 0) best = std::min(best, at(r - 1, c - 1) + diag);
        if (c + 1 < d2) best = std::min(best, at(r - 1, c + 1) + diag);
      }
      at(r, c) = best;
    }
  }
  for (std::size_t r = d1; r-- > 0;) {
    for (std::size_t c = d2; c-- > 0;) {
      double best = at(r, c);
      if (c + 1 < d2) best = std::min(best, at(r, c + 1) + 1.0);
      if (r + 1 < d1) {
        best = std::min(best, at(r + 1, c) + 1.0);
        if (c + 1 < d2) best = std::min(best, at(r + 1, c + 1) + diag);
        if (c > 0) best = std::min(best, at(r + 1, c - 1) + diag);
      }
      at(r, c) = best;
    }
  }
  return dist;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> quantile_edges(std::vector<double> values,
                                   std::size_t bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  for (std::size_t b = 1; b < bins; ++b) {
    const std::size_t idx = b * values.size() / bins;
    edges.push_back(values[std::min(idx, values.size() - 1)]);
  }
  return edges;
}

}  // namespace

RegressionData synth_regression_generate(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("synth_regression_generate: n must be >= 1");
  RegressionData data;
  data.x.resize(n);
  data.y.resize(n);
  data.f_hat.resize(n);
  Rng rng(derive_seed(seed, 0x7e6));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0.0, 10.0);
    const double eps = rng.next_normal();
    const double mean = std::sin(x) * std::sin(x) + 0.1;
    data.x[i] = x;
    data.f_hat[i] = mean;
    data.y[i] = mean + 0.3 * (1.0 + x / 10.0) * eps;
  }
  return data;
}

SegmentationDataset synth_segmentation_generate(std::size_t count,
                                                std::size_t d1, std::size_t d2,
                                                std::uint64_t seed,
                                                std::size_t embed_dim,
                                                Exec exec) {
  if (count == 0) throw ConfigError("synth_segmentation_generate: empty count");
  if (d1 * d2 < 16) throw ConfigError("synth_segmentation_generate: image too small");
  if (embed_dim < 5)
    throw ConfigError("synth_segmentation_generate: embed_dim must be >= 5");

  SegmentationDataset ds;
  ds.samples.resize(count);
  ds.difficulty.resize(count);
  ds.embedding = Matrix(count, embed_dim);

  par::parallel_for(
      count,
      [&](std::size_t img) {
        Rng rng(derive_seed(seed, img));
        SegmentationSample s;
        s.d1 = d1;
        s.d2 = d2;
        s.mask.assign(d1 * d2, 0);
        const std::size_t blobs = 1 + rng.uniform_below(3);
        const double rmax = 0.25 * static_cast<double>(std::min(d1, d2));
        for (std::size_t b = 0; b < blobs; ++b) {
          const double cx = rng.uniform(0.2, 0.8) * static_cast<double>(d1);
          const double cy = rng.uniform(0.2, 0.8) * static_cast<double>(d2);
          const double r = std::max(1.5, rng.uniform(0.4, 1.0) * rmax);
          for (std::size_t px = 0; px < d1; ++px) {
            for (std::size_t py = 0; py < d2; ++py) {
              const double dx = static_cast<double>(px) + 0.5 - cx;
              const double dy = static_cast<double>(py) + 0.5 - cy;
              if (dx * dx + dy * dy <= r * r) s.mask[px * d2 + py] = 1;
            }
          }
        }
        const double sigma = rng.uniform(0.8, 4.0);
        const double noise = rng.uniform(0.02, 0.08);

        std::vector<std::uint8_t> inv(s.mask.size());
        for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = s.mask[i] ? 0 : 1;
        const std::vector<double> to_mask = chamfer_distance(s.mask, d1, d2);
        const std::vector<double> to_background = chamfer_distance(inv, d1, d2);

        s.scores.resize(s.mask.size());
        std::size_t area = 0;
        for (std::size_t i = 0; i < s.mask.size(); ++i) {
          const double signed_dist =
              s.mask[i] ? to_background[i] : -to_mask[i];
          const double raw =
              sigmoid(signed_dist / sigma) + noise * rng.next_normal();
          s.scores[i] =
              static_cast<float>(std::min(1.0, std::max(0.0, raw)));
          area += s.mask[i];
        }
        const double area_frac =
            static_cast<double>(area) / static_cast<double>(d1 * d2);

        auto emb = ds.embedding.row(img);
        emb[0] = 1.0;
        emb[1] = sigma;
        emb[2] = sigma * sigma;
        emb[3] = area_frac;
        emb[4] = noise;
        for (std::size_t k = 5; k < embed_dim; ++k) emb[k] = rng.next_normal();

        ds.samples[img] = std::move(s);
        ds.difficulty[img] = sigma;
      },
      exec);
  return ds;
}

Aggregate aggregate_values(const std::vector<double>& values) {
  Aggregate agg;
  std::vector<double> good;
  for (double v : values)
    if (std::isfinite(v)) good.push_back(v);
  agg.count = good.size();
  if (good.empty()) return agg;
  agg.mean = mean_of(good);
  double ss = 0.0;
  for (double v : good) ss += (v - agg.mean) * (v - agg.mean);
  agg.sd = good.size() > 1
               ? std::sqrt(ss / static_cast<double>(good.size() - 1))
               : 0.0;
  return agg;
}

namespace {

struct PreparedClass {
  std::unique_ptr<FeatureMap> map;
  bool indicator_groups = false;  // per-group risks make sense
};

PreparedClass build_regression_class(const ExperimentConfig& cfg,
                                     const RegressionData& data,
                                     std::size_t res_lo, std::size_t res_hi,
                                     std::uint64_t seed) {
  PreparedClass out;
  switch (cfg.function_class) {
    case FunctionClassKind::Intercept:
      out.map = std::make_unique<InterceptMap>();
      break;
    case FunctionClassKind::Groups: {
      std::vector<double> xs(data.x.begin() + static_cast<std::ptrdiff_t>(res_lo),
                             data.x.begin() + static_cast<std::ptrdiff_t>(res_hi));
      out.map = std::make_unique<GroupIndicatorMap>(
          GroupIndicatorMap::binned(0, quantile_edges(std::move(xs),
                                                      cfg.group_count)));
      out.indicator_groups = true;
      break;
    }
    case FunctionClassKind::Embedding:
      // Raw covariate plus intercept: thresholds linear in x.
      out.map = std::make_unique<LinearEmbeddingMap>(1, std::nullopt, true);
      break;
    case FunctionClassKind::RfLeaf: {
      const std::size_t m = res_hi - res_lo;
      Matrix feats(m, 1);
      std::vector<double> targets(m);
      for (std::size_t i = 0; i < m; ++i) {
        feats.at(i, 0) = data.x[res_lo + i];
        targets[i] = std::abs(data.y[res_lo + i] - data.f_hat[res_lo + i]);
      }
      RfParams rf = cfg.rf;
      rf.seed = seed;
      auto forest = std::make_shared<RandomForest>(
          rf_fit(feats, targets, rf, cfg.exec));
      out.map = std::make_unique<RfLeafMap>(std::move(forest));
      out.indicator_groups = true;
      break;
    }
  }
  return out;
}

PreparedClass build_segmentation_class(const ExperimentConfig& cfg,
                                       const SegmentationDataset& ds,
                                       const std::vector<StepLoss>& losses,
                                       std::size_t res_lo, std::size_t res_hi,
                                       std::uint64_t seed) {
  PreparedClass out;
  const std::size_t q = ds.embedding.cols;
  switch (cfg.function_class) {
    case FunctionClassKind::Intercept:
      out.map = std::make_unique<InterceptMap>();
      break;
    case FunctionClassKind::Groups: {
      std::vector<double> diff(ds.difficulty.begin() + static_cast<std::ptrdiff_t>(res_lo),
                               ds.difficulty.begin() + static_cast<std::ptrdiff_t>(res_hi));
      out.map = std::make_unique<GroupIndicatorMap>(GroupIndicatorMap::binned(
          1, quantile_edges(std::move(diff), cfg.group_count)));
      out.indicator_groups = true;
      break;
    }
    case FunctionClassKind::Embedding: {
      std::optional<PcaModel> pca;
      if (cfg.pca.enabled) {
        Matrix res_emb(res_hi - res_lo, q);
        for (std::size_t i = res_lo; i < res_hi; ++i)
          for (std::size_t j = 0; j < q; ++j)
            res_emb.at(i - res_lo, j) = ds.embedding.at(i, j);
        pca = pca_fit(res_emb, cfg.pca.target_evr);
      }
      out.map = std::make_unique<LinearEmbeddingMap>(
          q, std::move(pca), cfg.pca.append_intercept);
      break;
    }
    case FunctionClassKind::RfLeaf: {
      // Residual targets: the per-image highest threshold whose recall risk
      // stays within alpha.
      const AlphaLevel alpha(cfg.alpha);
      const std::size_t m = res_hi - res_lo;
      Matrix feats(m, q);
      std::vector<double> targets(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < q; ++j)
          feats.at(i, j) = ds.embedding.at(res_lo + i, j);
        targets[i] =
            std::max(0.0, losses[res_lo + i].crossing_threshold(alpha));
      }
      RfParams rf = cfg.rf;
      rf.seed = seed;
      auto forest = std::make_shared<RandomForest>(
          rf_fit(feats, targets, rf, cfg.exec));
      out.map = std::make_unique<RfLeafMap>(std::move(forest));
      out.indicator_groups = true;
      break;
    }
  }
  return out;
}

void fill_tilted(const ExperimentConfig& cfg, std::uint64_t seed,
                 const Matrix& test_phi, const std::vector<double>& losses,
                 RepetitionRecord& rec) {
  if (cfg.tilt_direction_count == 0) return;
  Rng rng(derive_seed(seed, 0x7117));
  const std::size_t d = test_phi.cols;
  for (std::size_t k = 0; k < cfg.tilt_direction_count; ++k) {
    std::vector<double> w(d);
    for (double& v : w) v = rng.next_double();
    std::vector<double> weights(test_phi.rows, 0.0);
    for (std::size_t i = 0; i < test_phi.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += test_phi.at(i, j) * w[j];
      weights[i] = s;
    }
    rec.tilted_risks.push_back(tilted_risk(weights, losses));
  }
}

RepetitionRecord run_regression_rep(const ExperimentConfig& cfg, int rep) {
  RepetitionRecord rec;
  const std::uint64_t seed_r = derive_seed(cfg.split.seed, static_cast<std::uint64_t>(rep));
  const SplitPlan& plan = cfg.split;
  const std::size_t total =
      plan.train + plan.residual + plan.calibration + plan.test;
  const RegressionData data = synth_regression_generate(total, seed_r);

  const std::size_t res_lo = plan.train;
  const std::size_t res_hi = plan.train + plan.residual;
  const std::size_t cal_lo = res_hi;
  const std::size_t cal_hi = cal_lo + plan.calibration;
  const std::size_t test_lo = cal_hi;
  const std::size_t test_hi = test_lo + plan.test;

  PreparedClass fc =
      build_regression_class(cfg, data, res_lo, res_hi, derive_seed(seed_r, 101));

  const std::size_t d = fc.map->dim();
  Matrix cal_phi(plan.calibration, d);
  std::vector<StepLoss> cal_losses;
  cal_losses.reserve(plan.calibration);
  for (std::size_t i = cal_lo; i < cal_hi; ++i) {
    const double rec_x[1] = {data.x[i]};
    fc.map->featurize(rec_x, cal_phi.row(i - cal_lo));
    cal_losses.push_back(interval_loss(data.f_hat[i], data.y[i]));
  }
  Matrix test_phi(plan.test, d);
  for (std::size_t i = test_lo; i < test_hi; ++i) {
    const double rec_x[1] = {data.x[i]};
    fc.map->featurize(rec_x, test_phi.row(i - test_lo));
  }

  const AlphaLevel alpha(cfg.alpha);
  const Regularizer reg = cfg.ridge_gamma > 0.0
                              ? Regularizer::ridge(cfg.ridge_gamma)
                              : Regularizer::none();
  const std::vector<StepLoss> losses_copy = cal_losses;
  CalibrationSet calib(std::move(cal_phi), std::move(cal_losses));
  SolverConfig solver = cfg.solver;
  solver.seed = derive_seed(seed_r, 202);
  BatchOptions opts;
  opts.warm_start = !cfg.cold_start;
  opts.exec = cfg.exec;
  const std::vector<BatchItem> fits =
      calibrate_batch(calib, test_phi, alpha, reg, solver, opts);

  std::vector<double> losses_at_fit(plan.test, 0.0);
  std::vector<double> widths(plan.test, 0.0);
  std::vector<double> abs_residuals(plan.test, 0.0);
  rec.fit_count = plan.test;
  for (std::size_t t = 0; t < plan.test; ++t) {
    if (fits[t].failed) {
      rec.ok = false;
      rec.error = fits[t].error;
      continue;
    }
    const FitResult& fit = fits[t].fit;
    rec.converged_count += fit.converged;
    rec.max_residual = std::max(rec.max_residual, fit.stationarity_residual);
    const double u = predict_threshold(fit, test_phi.row(t));
    const std::size_t i = test_lo + t;
    losses_at_fit[t] = interval_loss(data.f_hat[i], data.y[i])(u);
    widths[t] = to_native(Orientation::GrowingSets, u);
    abs_residuals[t] = std::abs(data.y[i] - data.f_hat[i]);
  }
  rec.marginal_risk = mean_of(losses_at_fit);

  const double crc_u = marginal_crc_threshold(losses_copy, alpha);
  std::vector<double> crc_losses(plan.test, 0.0);
  for (std::size_t t = 0; t < plan.test; ++t) {
    const std::size_t i = test_lo + t;
    crc_losses[t] = interval_loss(data.f_hat[i], data.y[i])(crc_u);
  }
  rec.crc_marginal_risk = mean_of(crc_losses);

  if (fc.indicator_groups)
    rec.per_group = group_risks(test_phi, losses_at_fit).groups;
  fill_tilted(cfg, seed_r, test_phi, losses_at_fit, rec);

  try {
    const SpearmanResult sp = spearman(widths, abs_residuals);
    rec.spearman_rho = sp.rho;
    rec.spearman_p = sp.p_value;
  } catch (const DataError&) {
    rec.spearman_rho = 0.0;
    rec.spearman_p = 1.0;
  }
  if (cfg.keep_per_test) rec.thresholds_native = widths;
  return rec;
}

RepetitionRecord run_segmentation_rep(const ExperimentConfig& cfg, int rep) {
  RepetitionRecord rec;
  const std::uint64_t seed_r = derive_seed(cfg.split.seed, static_cast<std::uint64_t>(rep));
  const SplitPlan& plan = cfg.split;
  const std::size_t count = plan.residual + plan.calibration + plan.test;
  const SegmentationDataset ds = synth_segmentation_generate(
      count, cfg.seg_d1, cfg.seg_d2, seed_r, cfg.embed_dim, cfg.exec);

  std::vector<StepLoss> all_losses;
  all_losses.reserve(count);
  for (const SegmentationSample& s : ds.samples)
    all_losses.push_back(recall_loss(s));

  const std::size_t res_lo = 0;
  const std::size_t res_hi = plan.residual;
  const std::size_t cal_lo = res_hi;
  const std::size_t cal_hi = cal_lo + plan.calibration;
  const std::size_t test_lo = cal_hi;

  PreparedClass fc = build_segmentation_class(cfg, ds, all_losses, res_lo,
                                              res_hi, derive_seed(seed_r, 101));
  const std::size_t d = fc.map->dim();
  Matrix cal_phi(plan.calibration, d);
  std::vector<StepLoss> cal_losses;
  for (std::size_t i = cal_lo; i < cal_hi; ++i) {
    fc.map->featurize(ds.embedding.row(i), cal_phi.row(i - cal_lo));
    cal_losses.push_back(all_losses[i]);
  }
  Matrix test_phi(plan.test, d);
  for (std::size_t t = 0; t < plan.test; ++t)
    fc.map->featurize(ds.embedding.row(test_lo + t), test_phi.row(t));

  const AlphaLevel alpha(cfg.alpha);
  const Regularizer reg = cfg.ridge_gamma > 0.0
                              ? Regularizer::ridge(cfg.ridge_gamma)
                              : Regularizer::none();
  const std::vector<StepLoss> losses_copy = cal_losses;
  CalibrationSet calib(std::move(cal_phi), std::move(cal_losses));
  SolverConfig solver = cfg.solver;
  solver.seed = derive_seed(seed_r, 202);
  BatchOptions opts;
  opts.warm_start = !cfg.cold_start;
  opts.exec = cfg.exec;
  const std::vector<BatchItem> fits =
      calibrate_batch(calib, test_phi, alpha, reg, solver, opts);

  const double crc_u = marginal_crc_threshold(losses_copy, alpha);

  std::vector<double> losses_at_fit(plan.test, 0.0), recalls(plan.test, 0.0),
      precisions(plan.test, 0.0), crc_l(plan.test, 0.0),
      crc_recalls(plan.test, 0.0), crc_precisions(plan.test, 0.0),
      thresholds(plan.test, 0.0), fixed_recall(plan.test, 0.0);
  rec.fit_count = plan.test;
  for (std::size_t t = 0; t < plan.test; ++t) {
    if (fits[t].failed) {
      rec.ok = false;
      rec.error = fits[t].error;
      continue;
    }
    const FitResult& fit = fits[t].fit;
    rec.converged_count += fit.converged;
    rec.max_residual = std::max(rec.max_residual, fit.stationarity_residual);
    const SegmentationSample& s = ds.samples[test_lo + t];
    const double u = predict_threshold(fit, test_phi.row(t));
    thresholds[t] = to_native(Orientation::ShrinkingSets, u);
    losses_at_fit[t] = all_losses[test_lo + t](u);
    const MaskMetrics mm = mask_metrics(apply_threshold(s, thresholds[t]), s.mask);
    recalls[t] = mm.recall;
    precisions[t] = mm.precision;
    const MaskMetrics cm = mask_metrics(apply_threshold(s, crc_u), s.mask);
    crc_recalls[t] = cm.recall;
    crc_precisions[t] = cm.precision;
    crc_l[t] = all_losses[test_lo + t](crc_u);
    fixed_recall[t] =
        mask_metrics(apply_threshold(s, 0.5), s.mask).recall;
  }
  rec.marginal_risk = mean_of(losses_at_fit);
  rec.crc_marginal_risk = mean_of(crc_l);
  rec.recall_mean = mean_of(recalls);
  rec.precision_mean = mean_of(precisions);
  rec.crc_recall_mean = mean_of(crc_recalls);
  rec.crc_precision_mean = mean_of(crc_precisions);

  if (fc.indicator_groups)
    rec.per_group = group_risks(test_phi, losses_at_fit).groups;
  fill_tilted(cfg, seed_r, test_phi, losses_at_fit, rec);

  try {
    const SpearmanResult sp = spearman(thresholds, fixed_recall);
    rec.spearman_rho = sp.rho;
    rec.spearman_p = sp.p_value;
  } catch (const DataError&) {
    rec.spearman_rho = 0.0;
    rec.spearman_p = 1.0;
  }
  if (cfg.keep_per_test) {
    rec.thresholds_native = thresholds;
    rec.fixed_recall = fixed_recall;
  }
  return rec;
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.split.repetitions < 1)
    throw ConfigError("run_experiment: repetitions must be >= 1");
  if (cfg.split.calibration < 1 || cfg.split.test < 1 ||
      cfg.split.residual < 1 || cfg.split.train < 1)
    throw ConfigError("run_experiment: split sizes must be >= 1");
  EvalReport report;
  for (int rep = 0; rep < cfg.split.repetitions; ++rep) {
    try {
      report.reps.push_back(cfg.task == TaskKind::Regression
                                ? run_regression_rep(cfg, rep)
                                : run_segmentation_rep(cfg, rep));
    } catch (const std::exception& e) {
      RepetitionRecord rec;
      rec.ok = false;
      rec.error = e.what();
      report.reps.push_back(std::move(rec));
    }
  }

  auto collect = [&](auto&& get) {
    std::vector<double> v;
    for (const RepetitionRecord& r : report.reps)
      if (r.ok) v.push_back(get(r));
    return v;
  };
  report.aggregates["marginal_risk"] =
      aggregate_values(collect([](const auto& r) { return r.marginal_risk; }));
  report.aggregates["crc_marginal_risk"] = aggregate_values(
      collect([](const auto& r) { return r.crc_marginal_risk; }));
  if (cfg.task == TaskKind::Segmentation) {
    report.aggregates["recall_mean"] =
        aggregate_values(collect([](const auto& r) { return r.recall_mean; }));
    report.aggregates["precision_mean"] = aggregate_values(
        collect([](const auto& r) { return r.precision_mean; }));
    report.aggregates["crc_recall_mean"] = aggregate_values(
        collect([](const auto& r) { return r.crc_recall_mean; }));
    report.aggregates["crc_precision_mean"] = aggregate_values(
        collect([](const auto& r) { return r.crc_precision_mean; }));
  }
  report.aggregates["spearman_rho"] =
      aggregate_values(collect([](const auto& r) { return r.spearman_rho; }));
  report.aggregates["max_residual"] =
      aggregate_values(collect([](const auto& r) { return r.max_residual; }));
  return report;
}

}  // namespace riskcal
