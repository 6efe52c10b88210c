#include "riskcal/random_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "riskcal/errors.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

namespace {

using json = nlohmann::json;

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best variance-reduction split over the given feature subset. Candidate
// thresholds are midpoints between distinct consecutive values.
SplitChoice best_split(const Matrix& x, std::span<const double> y,
                       const std::vector<int>& rows,
                       const std::vector<int>& features, int min_leaf,
                       std::vector<int>& order, std::vector<double>& prefix) {
  SplitChoice best;
  const int m = static_cast<int>(rows.size());
  double total = 0.0;
  for (int r : rows) total += y[static_cast<std::size_t>(r)];
  // A split must strictly beat keeping the node whole; the margin absorbs
  // prefix-sum rounding so constant targets never split.
  const double baseline = total * total / m;
  const double margin = 1e-12 * (baseline + 1.0);
  for (int f : features) {
    order.assign(rows.begin(), rows.end());
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double xa = x.at(static_cast<std::size_t>(a), static_cast<std::size_t>(f));
      const double xb = x.at(static_cast<std::size_t>(b), static_cast<std::size_t>(f));
      if (xa != xb) return xa < xb;
      return a < b;
    });
    prefix.assign(static_cast<std::size_t>(m) + 1, 0.0);
    for (int k = 0; k < m; ++k)
      prefix[static_cast<std::size_t>(k) + 1] =
          prefix[static_cast<std::size_t>(k)] +
          y[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    for (int k = min_leaf; k <= m - min_leaf; ++k) {
      const double xl = x.at(static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)]),
                             static_cast<std::size_t>(f));
      const double xr = x.at(static_cast<std::size_t>(order[static_cast<std::size_t>(k)]),
                             static_cast<std::size_t>(f));
      if (xl == xr) continue;
      const double sl = prefix[static_cast<std::size_t>(k)];
      const double sr = total - sl;
      // SSE decrease = sl^2/k + sr^2/(m-k) - total^2/m
      const double gain = sl * sl / k + sr * sr / (m - k);
      if (gain <= baseline + margin) continue;
      if (!best.found || gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = 0.5 * (xl + xr);
        best.gain = gain;
      }
    }
  }
  return best;
}

RandomForest::Tree build_tree(const Matrix& x, std::span<const double> y,
                              const RfParams& params, double frac,
                              std::uint64_t seed) {
  const std::size_t n = x.rows;
  const int p = static_cast<int>(x.cols);
  Rng rng(seed);

  std::vector<int> root_rows(n);
  if (params.bootstrap) {
    for (std::size_t i = 0; i < n; ++i)
      root_rows[i] = static_cast<int>(rng.uniform_below(n));
    std::sort(root_rows.begin(), root_rows.end());
  } else {
    std::iota(root_rows.begin(), root_rows.end(), 0);
  }

  const int per_split =
      std::max(1, static_cast<int>(std::ceil(frac * static_cast<double>(p))));

  RandomForest::Tree tree;
  std::vector<int> order;
  std::vector<double> prefix;
  std::vector<int> all_features(static_cast<std::size_t>(p));
  std::iota(all_features.begin(), all_features.end(), 0);

  struct Work {
    int node;
    std::vector<int> rows;
    int depth;
  };
  tree.nodes.emplace_back();
  std::vector<Work> stack;
  stack.push_back({0, std::move(root_rows), 0});

  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    RandomForest::Node& node = tree.nodes[static_cast<std::size_t>(w.node)];
    double sum = 0.0;
    for (int r : w.rows) sum += y[static_cast<std::size_t>(r)];
    node.count = static_cast<int>(w.rows.size());
    node.mean = sum / static_cast<double>(node.count);

    if (w.depth >= params.max_depth ||
        node.count < 2 * params.min_samples_leaf)
      continue;  // stays a leaf

    std::vector<int> candidates;
    if (per_split >= p) {
      candidates = all_features;
    } else {
      std::vector<int> pool = all_features;
      rng.shuffle(pool.data(), pool.size());
      candidates.assign(pool.begin(), pool.begin() + per_split);
      std::sort(candidates.begin(), candidates.end());
    }

    const SplitChoice split = best_split(x, y, w.rows, candidates,
                                         params.min_samples_leaf, order, prefix);
    if (!split.found) continue;  // constant features: stump

    std::vector<int> left, right;
    left.reserve(w.rows.size());
    right.reserve(w.rows.size());
    for (int r : w.rows) {
      if (x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(split.feature)) <=
          split.threshold)
        left.push_back(r);
      else
        right.push_back(r);
    }
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const int ri = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    RandomForest::Node& parent = tree.nodes[static_cast<std::size_t>(w.node)];
    parent.feature = split.feature;
    parent.threshold = split.threshold;
    parent.left = li;
    parent.right = ri;
    // Right first so the left branch is processed next (depth-first,
    // deterministic node numbering either way).
    stack.push_back({ri, std::move(right), w.depth + 1});
    stack.push_back({li, std::move(left), w.depth + 1});
  }
  return tree;
}

json node_to_json(const RandomForest::Tree& tree, int idx) {
  const RandomForest::Node& node = tree.nodes[static_cast<std::size_t>(idx)];
  if (node.is_leaf()) {
    return json{{"leaf", node.leaf_id}, {"mean", node.mean}, {"count", node.count}};
  }
  return json{{"feature", node.feature},
              {"threshold", node.threshold},
              {"left", node_to_json(tree, node.left)},
              {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const json& j, RandomForest::Tree& tree) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes[static_cast<std::size_t>(idx)].leaf_id = j.at("leaf").get<int>();
    tree.nodes[static_cast<std::size_t>(idx)].mean = j.at("mean").get<double>();
    tree.nodes[static_cast<std::size_t>(idx)].count = j.at("count").get<int>();
    return idx;
  }
  const int feature = j.at("feature").get<int>();
  const double threshold = j.at("threshold").get<double>();
  const int left = node_from_json(j.at("left"), tree);
  const int right = node_from_json(j.at("right"), tree);
  RandomForest::Node& node = tree.nodes[static_cast<std::size_t>(idx)];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return idx;
}

}  // namespace

int RandomForest::Tree::leaf_index(std::span<const double> x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const Node& node = nodes[static_cast<std::size_t>(idx)];
    idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold
              ? node.left
              : node.right;
  }
  return idx;
}

std::vector<int> RandomForest::leaves(std::span<const double> x) const {
  if (x.size() != feature_count_)
    throw DataError("RandomForest: input feature count mismatch");
  std::vector<int> out;
  out.reserve(trees_.size());
  for (const Tree& tree : trees_)
    out.push_back(
        tree.nodes[static_cast<std::size_t>(tree.leaf_index(x))].leaf_id);
  return out;
}

void RandomForest::leaf_embedding(std::span<const double> x,
                                  std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(leaf_count_))
    throw DataError("RandomForest: embedding output size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (int id : leaves(x)) out[static_cast<std::size_t>(id)] = 1.0;
}

double RandomForest::predict_mean(std::span<const double> x) const {
  double s = 0.0;
  for (const Tree& tree : trees_)
    s += tree.nodes[static_cast<std::size_t>(tree.leaf_index(x))].mean;
  return s / static_cast<double>(trees_.size());
}

RandomForest rf_fit(const Matrix& features, std::span<const double> targets,
                    const RfParams& params, Exec exec) {
  if (features.rows == 0 || features.cols == 0)
    throw DataError("rf_fit: empty training data");
  if (features.rows != targets.size())
    throw DataError("rf_fit: feature/target length mismatch");
  if (features.rows < 2 * static_cast<std::size_t>(params.min_samples_leaf))
    throw DataError("rf_fit: need at least 2*min_samples_leaf rows");
  if (params.tree_count < 1 || params.min_samples_leaf < 1 ||
      params.max_depth < 0)
    throw ConfigError("rf_fit: bad hyperparameters");
  for (double t : targets)
    if (!(t >= 0.0)) throw DataError("rf_fit: targets must be nonnegative");

  const double frac = params.feature_fraction > 0.0
                          ? std::min(params.feature_fraction, 1.0)
                          : (features.cols == 1 ? 1.0 : 1.0 / 3.0);

  RandomForest forest;
  forest.params_ = params;
  forest.feature_count_ = features.cols;
  forest.trees_.resize(static_cast<std::size_t>(params.tree_count));
  par::parallel_for(
      static_cast<std::size_t>(params.tree_count),
      [&](std::size_t t) {
        forest.trees_[t] = build_tree(features, targets, params, frac,
                                      derive_seed(params.seed, t));
      },
      exec);

  int next_leaf = 0;
  for (RandomForest::Tree& tree : forest.trees_)
    for (RandomForest::Node& node : tree.nodes)
      if (node.is_leaf()) node.leaf_id = next_leaf++;
  forest.leaf_count_ = next_leaf;
  return forest;
}

std::string RandomForest::to_json() const {
  json j;
  j["format"] = "riskcal-rf";
  j["version"] = 1;
  j["seed"] = params_.seed;
  j["feature_count"] = feature_count_;
  j["leaf_count"] = leaf_count_;
  j["params"] = {{"tree_count", params_.tree_count},
                 {"max_depth", params_.max_depth},
                 {"min_samples_leaf", params_.min_samples_leaf},
                 {"feature_fraction", params_.feature_fraction},
                 {"bootstrap", params_.bootstrap}};
  json trees = json::array();
  for (const Tree& tree : trees_) trees.push_back(node_to_json(tree, 0));
  j["trees"] = std::move(trees);
  return j.dump(2);
}

RandomForest RandomForest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("RandomForest: bad JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != "riskcal-rf" ||
      !j.contains("version") || j["version"] != 1)
    throw DataError("RandomForest: unknown model format/version");
  RandomForest forest;
  forest.feature_count_ = j.at("feature_count").get<std::size_t>();
  forest.leaf_count_ = j.at("leaf_count").get<int>();
  const json& params = j.at("params");
  forest.params_.tree_count = params.at("tree_count").get<int>();
  forest.params_.max_depth = params.at("max_depth").get<int>();
  forest.params_.min_samples_leaf = params.at("min_samples_leaf").get<int>();
  forest.params_.feature_fraction = params.at("feature_fraction").get<double>();
  forest.params_.bootstrap = params.at("bootstrap").get<bool>();
  forest.params_.seed = j.at("seed").get<std::uint64_t>();
  for (const json& t : j.at("trees")) {
    Tree tree;
    node_from_json(t, tree);
    forest.trees_.push_back(std::move(tree));
  }
  if (forest.trees_.empty()) throw DataError("RandomForest: no trees");
  return forest;
}

}  // namespace riskcal
