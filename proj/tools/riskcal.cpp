// Command-line front end: data simulation, forest leaf embeddings,
// per-input threshold calibration, and evaluation reports.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 certificate failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riskcal/calibration.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/function_class.hpp"
#include "riskcal/io.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/rng.hpp"
#include "riskcal/sim_eval.hpp"
#include "riskcal/stats.hpp"
#include "riskcal/tasks.hpp"

using json = nlohmann::json;
using namespace riskcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCertificate = 4;

json default_config() {
  return json{
      {"task", "regression"},
      {"function_class", "rf-leaf"},
      {"alpha", 0.1},
      {"seed", 0},
      {"threads", 0},
      {"regularizer", {{"type", "none"}, {"gamma", 0.0}}},
      {"solver",
       {{"max_iterations", 20000}, {"tolerance", 0.0}, {"cold_start", false}}},
      {"split",
       {{"train", 2000},
        {"residual", 1000},
        {"calibration", 9000},
        {"test", 5000},
        {"repetitions", 1}}},
      {"rf",
       {{"trees", 20},
        {"max_depth", 4},
        {"min_samples_leaf", 50},
        {"feature_fraction", 0.0},
        {"bootstrap", true}}},
      {"pca", {{"enabled", false}, {"target_evr", 0.85}, {"append_intercept", true}}},
      {"groups", {{"count", 5}}},
      {"segmentation", {{"d1", 32}, {"d2", 32}, {"embed_dim", 12}}},
  };
}

void reject_unknown_keys(const json& value, const json& schema,
                         const std::string& prefix) {
  if (!value.is_object()) return;
  for (const auto& [key, sub] : value.items()) {
    if (!schema.contains(key))
      throw ConfigError("unknown config key: " + prefix + key);
    if (sub.is_object()) reject_unknown_keys(sub, schema.at(key), prefix + key + ".");
  }
}

json load_config(const std::string& path) {
  json merged = default_config();
  if (path.empty()) return merged;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  reject_unknown_keys(user, merged, "");
  merged.merge_patch(user);
  return merged;
}

// ---- shared helpers -------------------------------------------------------

struct LoadedTask {
  std::vector<std::int64_t> ids;
  std::vector<StepLoss> losses;          // normalized orientation
  Orientation orientation = Orientation::GrowingSets;
  // regression payload
  RegressionData reg;
  // segmentation payload
  std::vector<SegmentationSample> seg;
};

LoadedTask load_task_data(const std::string& task, const std::string& path,
                          bool need_losses) {
  LoadedTask t;
  if (task == "regression") {
    RegressionTable table = read_regression_csv(path);
    t.ids = std::move(table.ids);
    t.reg = std::move(table.data);
    t.orientation = Orientation::GrowingSets;
    if (need_losses)
      for (std::size_t i = 0; i < t.ids.size(); ++i)
        t.losses.push_back(interval_loss(t.reg.f_hat[i], t.reg.y[i]));
  } else if (task == "segmentation") {
    SegContainer c = read_segmentation_container(path);
    t.orientation = Orientation::ShrinkingSets;
    for (std::size_t i = 0; i < c.samples.size(); ++i)
      t.ids.push_back(static_cast<std::int64_t>(i));
    if (need_losses)
      for (const SegmentationSample& s : c.samples)
        t.losses.push_back(recall_loss(s));
    t.seg = std::move(c.samples);
  } else {
    throw ConfigError("unknown task: " + task);
  }
  return t;
}

void check_unique_ids(const std::vector<std::int64_t>& ids,
                      const std::string& what) {
  std::vector<std::int64_t> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DataError("duplicate ids in " + what);
}

// Reorder embedding rows to match `ids`; errors on any missing id.
Matrix align_embedding(const EmbeddingTable& table,
                       const std::vector<std::int64_t>& ids,
                       const std::string& what) {
  std::map<std::int64_t, std::size_t> index;
  for (std::size_t r = 0; r < table.ids.size(); ++r)
    index[table.ids[r]] = r;
  Matrix out(ids.size(), table.values.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = index.find(ids[i]);
    if (it == index.end())
      throw DataError("id " + std::to_string(ids[i]) + " missing from " + what);
    const auto src = table.values.row(it->second);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string task = "regression";
  std::size_t n = 100;
  std::size_t count = 16;
  std::size_t d1 = 32, d2 = 32;
  std::size_t embed_dim = 12;
  std::string out;
  std::string embedding_out;
};

int cmd_simulate(const SimulateArgs& args, std::uint64_t seed) {
  if (args.out.empty()) throw ConfigError("simulate: --out is required");
  if (args.task == "regression") {
    const RegressionData data = synth_regression_generate(args.n, seed);
    RegressionTable table;
    table.data = data;
    for (std::size_t i = 0; i < args.n; ++i)
      table.ids.push_back(static_cast<std::int64_t>(i));
    write_regression_csv(args.out, table);
    std::cout << "simulate: wrote " << args.n << " regression rows to "
              << args.out << " (seed " << seed << ")\n";
    return kExitOk;
  }
  if (args.task == "segmentation") {
    const SegmentationDataset ds = synth_segmentation_generate(
        args.count, args.d1, args.d2, seed, args.embed_dim);
    SegContainer c;
    c.seed = seed;
    c.samples = ds.samples;
    write_segmentation_container(args.out, c);
    if (!args.embedding_out.empty()) {
      EmbeddingTable table;
      table.values = ds.embedding;
      for (std::size_t i = 0; i < args.count; ++i)
        table.ids.push_back(static_cast<std::int64_t>(i));
      write_embedding_file(args.embedding_out, table);
    }
    std::cout << "simulate: wrote " << args.count << " images ("
              << args.d1 << "x" << args.d2 << ") to " << args.out << " (seed "
              << seed << ")\n";
    return kExitOk;
  }
  throw ConfigError("unknown task: " + args.task);
}

// ---- rf-embed -------------------------------------------------------------

struct RfEmbedArgs {
  std::string residuals;
  std::string calib;
  std::string test;
  std::string model_out;
  std::string model_in;
  std::string calib_out;
  std::string test_out;
};

void write_leaf_embeddings(const RandomForest& forest,
                           const std::vector<std::int64_t>& ids,
                           const std::vector<double>& xs,
                           const std::string& path) {
  EmbeddingTable table;
  table.ids = ids;
  table.values = Matrix(ids.size(), static_cast<std::size_t>(forest.leaf_count()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double x[1] = {xs[i]};
    forest.leaf_embedding(x, table.values.row(i));
  }
  write_embedding_file(path, table);
}

int cmd_rf_embed(const RfEmbedArgs& args, const json& cfg, std::uint64_t seed) {
  RandomForest forest;
  if (!args.model_in.empty()) {
    std::ifstream in(args.model_in);
    if (!in) throw DataError("cannot open model file: " + args.model_in);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    forest = RandomForest::from_json(text);
  } else {
    if (args.residuals.empty())
      throw ConfigError("rf-embed: --residuals or --model-in is required");
    const RegressionTable res = read_regression_csv(args.residuals);
    Matrix feats(res.ids.size(), 1);
    std::vector<double> targets(res.ids.size());
    for (std::size_t i = 0; i < res.ids.size(); ++i) {
      feats.at(i, 0) = res.data.x[i];
      targets[i] = std::abs(res.data.y[i] - res.data.f_hat[i]);
    }
    RfParams params;
    params.tree_count = cfg.at("rf").at("trees").get<int>();
    params.max_depth = cfg.at("rf").at("max_depth").get<int>();
    params.min_samples_leaf = cfg.at("rf").at("min_samples_leaf").get<int>();
    params.feature_fraction = cfg.at("rf").at("feature_fraction").get<double>();
    params.bootstrap = cfg.at("rf").at("bootstrap").get<bool>();
    params.seed = seed;
    forest = rf_fit(feats, targets, params);
  }
  if (!args.model_out.empty()) {
    std::ofstream out(args.model_out);
    if (!out) throw DataError("cannot write model file: " + args.model_out);
    out << forest.to_json() << '\n';
  }
  for (const auto& [in_path, out_path] :
       {std::pair{args.calib, args.calib_out}, std::pair{args.test, args.test_out}}) {
    if (in_path.empty()) continue;
    if (out_path.empty())
      throw ConfigError("rf-embed: missing output path for " + in_path);
    const RegressionTable table = read_regression_csv(in_path);
    write_leaf_embeddings(forest, table.ids, table.data.x, out_path);
  }
  std::cout << "rf-embed: " << forest.tree_count() << " trees, "
            << forest.leaf_count() << " leaves (seed " << seed << ")\n";
  return kExitOk;
}

// ---- calibrate ------------------------------------------------------------

struct CalibrateArgs {
  std::string task = "regression";
  std::string function_class = "intercept";
  std::string calib;
  std::string test;
  std::string calib_embedding;
  std::string test_embedding;
  std::string baseline;  // "crc" replaces per-input fits by the constant
  std::string out;
  std::string cert_out;
};

std::unique_ptr<FeatureMap> build_cli_map(const CalibrateArgs& args,
                                          const json& cfg,
                                          const LoadedTask& calib_data) {
  if (args.function_class == "intercept")
    return std::make_unique<InterceptMap>();
  // groups: quantile bins of the raw covariate
  if (args.task != "regression")
    throw ConfigError("groups class requires the regression task");
  std::vector<double> xs = calib_data.reg.x;
  std::sort(xs.begin(), xs.end());
  const std::size_t bins = cfg.at("groups").at("count").get<std::size_t>();
  std::vector<double> edges;
  for (std::size_t b = 1; b < bins; ++b)
    edges.push_back(xs[std::min(b * xs.size() / bins, xs.size() - 1)]);
  return std::make_unique<GroupIndicatorMap>(
      GroupIndicatorMap::binned(0, std::move(edges)));
}

int cmd_calibrate(const CalibrateArgs& args, const json& cfg,
                  std::uint64_t seed) {
  if (args.calib.empty() || args.test.empty() || args.out.empty())
    throw ConfigError("calibrate: --calib, --test and --out are required");
  if (args.function_class != "intercept" && args.function_class != "groups" &&
      args.function_class != "embedding" && args.function_class != "rf-leaf")
    throw ConfigError("unknown function class: " + args.function_class);
  const double alpha_value = cfg.at("alpha").get<double>();
  const AlphaLevel alpha(alpha_value);
  const LoadedTask calib_data = load_task_data(args.task, args.calib, true);
  const LoadedTask test_data = load_task_data(args.task, args.test, false);
  check_unique_ids(test_data.ids, "test data");
  check_unique_ids(calib_data.ids, "calibration data");

  ThresholdTable thresholds;
  thresholds.seed = seed;
  thresholds.alpha = alpha_value;
  thresholds.ids = test_data.ids;

  if (args.baseline == "crc") {
    const double u = marginal_crc_threshold(calib_data.losses, alpha);
    thresholds.kind = "crc";
    thresholds.thresholds.assign(test_data.ids.size(),
                                 to_native(calib_data.orientation, u));
    write_thresholds_csv(args.out, thresholds);
    std::cout << "calibrate: constant baseline threshold "
              << to_native(calib_data.orientation, u) << " for "
              << test_data.ids.size() << " records\n";
    return kExitOk;
  }
  if (!args.baseline.empty())
    throw ConfigError("unknown baseline: " + args.baseline);

  // Assemble features.
  Matrix cal_phi, test_phi;
  const bool needs_embedding = args.function_class == "embedding" ||
                               args.function_class == "rf-leaf";
  if (needs_embedding) {
    if (args.calib_embedding.empty() || args.test_embedding.empty())
      throw ConfigError("calibrate: embedding files required for this class");
    const EmbeddingTable cal_table = read_embedding_file(args.calib_embedding);
    const EmbeddingTable test_table = read_embedding_file(args.test_embedding);
    if (cal_table.values.cols != test_table.values.cols)
      throw DataError("calibration/test embedding dimensions differ");
    Matrix cal_raw = align_embedding(cal_table, calib_data.ids, "calib embedding");
    Matrix test_raw = align_embedding(test_table, test_data.ids, "test embedding");
    const bool use_pca = cfg.at("pca").at("enabled").get<bool>() &&
                         args.function_class == "embedding";
    std::optional<PcaModel> pca;
    if (use_pca)
      pca = pca_fit(cal_raw, cfg.at("pca").at("target_evr").get<double>());
    const LinearEmbeddingMap map(
        cal_raw.cols, std::move(pca),
        use_pca && cfg.at("pca").at("append_intercept").get<bool>());
    cal_phi = map.featurize_all(cal_raw);
    test_phi = map.featurize_all(test_raw);
  } else {
    const auto map = build_cli_map(args, cfg, calib_data);
    Matrix cal_raw(calib_data.ids.size(), 1), test_raw(test_data.ids.size(), 1);
    if (args.task == "regression") {
      for (std::size_t i = 0; i < calib_data.ids.size(); ++i)
        cal_raw.at(i, 0) = calib_data.reg.x[i];
      for (std::size_t i = 0; i < test_data.ids.size(); ++i)
        test_raw.at(i, 0) = test_data.reg.x[i];
    }
    cal_phi = map->featurize_all(cal_raw);
    test_phi = map->featurize_all(test_raw);
  }

  SolverConfig solver;
  solver.max_iterations = cfg.at("solver").at("max_iterations").get<int>();
  solver.tolerance = cfg.at("solver").at("tolerance").get<double>();
  solver.seed = seed;
  BatchOptions opts;
  opts.warm_start = !cfg.at("solver").at("cold_start").get<bool>();

  const std::string reg_type = cfg.at("regularizer").at("type").get<std::string>();
  Regularizer reg = Regularizer::none();
  if (reg_type == "ridge")
    reg = Regularizer::ridge(cfg.at("regularizer").at("gamma").get<double>());
  else if (reg_type != "none")
    throw ConfigError("unknown regularizer type: " + reg_type);

  CalibrationSet calib(std::move(cal_phi), calib_data.losses);
  const double tau = resolve_tolerance(calib, solver);
  const auto batch = calibrate_batch(calib, test_phi, alpha, reg, solver, opts);

  thresholds.kind = "aacrc";
  thresholds.thresholds.resize(batch.size());
  std::vector<CertificateRow> cert(batch.size());
  bool cert_failure = false;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].failed) throw DataError("fit failed: " + batch[i].error);
    const FitResult& fit = batch[i].fit;
    const double u = predict_threshold(fit, test_phi.row(i));
    thresholds.thresholds[i] = to_native(calib_data.orientation, u);
    cert[i] = {test_data.ids[i], fit.stationarity_residual, fit.converged,
               fit.objective, fit.iterations};
    if (fit.stationarity_residual > tau) cert_failure = true;
  }
  write_thresholds_csv(args.out, thresholds);
  if (!args.cert_out.empty())
    write_certificate_csv(args.cert_out, seed, tau, cert);
  std::cout << "calibrate: " << batch.size() << " thresholds (tau " << tau
            << (cert_failure ? ", CERTIFICATE FAILURE" : "") << ")\n";
  return cert_failure ? kExitCertificate : kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string task = "regression";
  std::string test;
  std::string thresholds;
  std::string baseline_thresholds;
  std::string out_json;
  std::string out_csv;
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.test.empty() || args.thresholds.empty())
    throw ConfigError("evaluate: --test and --thresholds are required");
  if (args.out_json.empty() && args.out_csv.empty())
    throw ConfigError("evaluate: need --out-json or --out-csv");
  const LoadedTask data = load_task_data(args.task, args.test, true);
  if (data.ids.empty()) throw DataError("empty test set");
  const ThresholdTable table = read_thresholds_csv(args.thresholds);
  if (table.ids != data.ids)
    throw DataError("threshold ids do not match the test data");

  FileEvalReport report;
  report.task = args.task;
  report.seed = table.seed;
  report.alpha = table.alpha;
  report.n_test = data.ids.size();

  std::optional<ThresholdTable> baseline;
  if (!args.baseline_thresholds.empty()) {
    baseline = read_thresholds_csv(args.baseline_thresholds);
    if (baseline->ids != data.ids)
      throw DataError("baseline threshold ids do not match the test data");
    report.has_baseline = true;
  }

  auto risk_at = [&](std::size_t i, double native) {
    return data.losses[i](from_native(data.orientation, native));
  };

  double risk = 0.0, crc_risk = 0.0;
  for (std::size_t i = 0; i < data.ids.size(); ++i) {
    risk += risk_at(i, table.thresholds[i]);
    if (baseline) crc_risk += risk_at(i, baseline->thresholds[i]);
  }
  report.marginal_risk = risk / static_cast<double>(data.ids.size());
  if (baseline)
    report.crc_marginal_risk = crc_risk / static_cast<double>(data.ids.size());

  if (args.task == "segmentation") {
    const std::size_t n = data.seg.size();
    std::vector<double> recalls(n), precisions(n), fixed(n);
    double crc_rec = 0.0, crc_prec = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const SegmentationSample& s = data.seg[i];
      const MaskMetrics m =
          mask_metrics(apply_threshold(s, table.thresholds[i]), s.mask);
      recalls[i] = m.recall;
      precisions[i] = m.precision;
      fixed[i] = mask_metrics(apply_threshold(s, 0.5), s.mask).recall;
      if (baseline) {
        const MaskMetrics c =
            mask_metrics(apply_threshold(s, baseline->thresholds[i]), s.mask);
        crc_rec += c.recall;
        crc_prec += c.precision;
      }
    }
    double rsum = 0.0, psum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rsum += recalls[i];
      psum += precisions[i];
    }
    report.recall_mean = rsum / static_cast<double>(n);
    report.precision_mean = psum / static_cast<double>(n);
    if (baseline) {
      report.crc_recall_mean = crc_rec / static_cast<double>(n);
      report.crc_precision_mean = crc_prec / static_cast<double>(n);
    }
    try {
      const SpearmanResult sp = spearman(table.thresholds, fixed);
      report.spearman_rho = sp.rho;
      report.spearman_p = sp.p_value;
    } catch (const DataError&) {
      report.spearman_rho = 0.0;
      report.spearman_p = 1.0;
    }
    // thresholds grouped by recall-at-0.5 bins of width 0.1
    for (int b = 0; b < 10; ++b) {
      RecallBin bin;
      bin.lo = 0.1 * b;
      bin.hi = 0.1 * (b + 1);
      std::vector<double> members;
      for (std::size_t i = 0; i < n; ++i) {
        const bool in_bin = fixed[i] >= bin.lo &&
                            (b == 9 ? fixed[i] <= bin.hi : fixed[i] < bin.hi);
        if (in_bin) members.push_back(table.thresholds[i]);
      }
      bin.count = members.size();
      if (!members.empty()) {
        const Aggregate agg = aggregate_values(members);
        bin.mean_threshold = agg.mean;
        bin.sd_threshold = agg.sd;
      }
      report.bins.push_back(bin);
    }
  }
  if (!args.out_json.empty()) write_file_report_json(args.out_json, report);
  if (!args.out_csv.empty()) write_file_report_csv(args.out_csv, report);
  std::cout << "evaluate: marginal risk " << report.marginal_risk << " over "
            << report.n_test << " records\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive conformal risk-control calibration toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::int64_t seed_flag = -1;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "seed override");
  app.add_option("--threads", threads, "worker thread cap (0 = default)");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic data");
  simulate->add_option("--task", sim.task, "regression | segmentation");
  simulate->add_option("--n", sim.n, "regression rows");
  simulate->add_option("--count", sim.count, "segmentation images");
  simulate->add_option("--d1", sim.d1, "image rows");
  simulate->add_option("--d2", sim.d2, "image cols");
  simulate->add_option("--embed-dim", sim.embed_dim, "embedding width");
  simulate->add_option("--out", sim.out, "output data file");
  simulate->add_option("--embedding-out", sim.embedding_out,
                       "embedding file (segmentation)");

  RfEmbedArgs rfe;
  CLI::App* rf_embed = app.add_subcommand(
      "rf-embed", "train a residual forest and write leaf embeddings");
  rf_embed->add_option("--residuals", rfe.residuals, "residual-split CSV");
  rf_embed->add_option("--model-in", rfe.model_in, "reuse a saved model");
  rf_embed->add_option("--model-out", rfe.model_out, "model JSON output");
  rf_embed->add_option("--calib", rfe.calib, "calibration CSV to embed");
  rf_embed->add_option("--test", rfe.test, "test CSV to embed");
  rf_embed->add_option("--calib-out", rfe.calib_out, "calibration embedding out");
  rf_embed->add_option("--test-out", rfe.test_out, "test embedding out");

  CalibrateArgs cal;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "fit per-input thresholds with a certificate");
  calibrate->add_option("--task", cal.task, "regression | segmentation");
  calibrate->add_option("--class", cal.function_class,
                        "intercept | groups | embedding | rf-leaf");
  calibrate->add_option("--calib", cal.calib, "calibration data");
  calibrate->add_option("--test", cal.test, "test data");
  calibrate->add_option("--calib-embedding", cal.calib_embedding,
                        "calibration embedding file");
  calibrate->add_option("--test-embedding", cal.test_embedding,
                        "test embedding file");
  calibrate->add_option("--baseline", cal.baseline,
                        "crc: constant marginal threshold instead of fits");
  calibrate->add_option("--out", cal.out, "thresholds CSV");
  calibrate->add_option("--cert-out", cal.cert_out, "certificate CSV");

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score thresholds");
  evaluate->add_option("--task", ev.task, "regression | segmentation");
  evaluate->add_option("--test", ev.test, "test data with ground truth");
  evaluate->add_option("--thresholds", ev.thresholds, "thresholds CSV");
  evaluate->add_option("--baseline-thresholds", ev.baseline_thresholds,
                       "baseline thresholds CSV for paired columns");
  evaluate->add_option("--out-json", ev.out_json, "report JSON");
  evaluate->add_option("--out-csv", ev.out_csv, "report CSV");

  CLI::App* config_cmd = app.add_subcommand("config", "configuration helpers");
  CLI::App* dump = config_cmd->add_subcommand("dump-defaults",
                                              "print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const json cfg = load_config(config_path);
    const std::uint64_t seed =
        seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag)
                       : cfg.at("seed").get<std::uint64_t>();
    const int thread_cap =
        threads > 0 ? threads : cfg.at("threads").get<int>();
    if (thread_cap > 0) par::set_threads(thread_cap);

    if (dump->parsed()) {
      std::cout << default_config().dump(2) << '\n';
      return kExitOk;
    }
    if (config_cmd->parsed())
      throw ConfigError("config: expected a subcommand (dump-defaults)");
    if (simulate->parsed()) return cmd_simulate(sim, seed);
    if (rf_embed->parsed()) return cmd_rf_embed(rfe, cfg, seed);
    if (calibrate->parsed()) return cmd_calibrate(cal, cfg, seed);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    throw ConfigError("no subcommand given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
