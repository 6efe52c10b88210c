#ifndef RISKCAL_RANDOM_FOREST_HPP
#define RISKCAL_RANDOM_FOREST_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskcal/matrix.hpp"
#include "riskcal/parallel.hpp"

namespace riskcal {

struct RfParams {
  int tree_count = 20;
  int max_depth = 4;
  int min_samples_leaf = 50;
  // Fraction of features considered per split; <= 0 selects 1.0 for
  // one-dimensional inputs and 1/3 otherwise.
  double feature_fraction = 0.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

// CART regression forest grown by variance reduction on absolute residuals.
// Each leaf carries a globally unique id (contiguous across the forest), so
// leaf membership doubles as an overlapping-group embedding: every input
// activates exactly one leaf per tree.
class RandomForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_id = -1;
    double mean = 0.0;
    int count = 0;
    bool is_leaf() const { return feature < 0; }
  };

  struct Tree {
    std::vector<Node> nodes;
    int leaf_index(std::span<const double> x) const;
  };

  int tree_count() const { return static_cast<int>(trees_.size()); }
  int leaf_count() const { return leaf_count_; }
  std::size_t feature_count() const { return feature_count_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const RfParams& params() const { return params_; }

  // Leaf ids activated by x, one per tree.
  std::vector<int> leaves(std::span<const double> x) const;

  // Binary indicator over all leaves; out must have size leaf_count().
  void leaf_embedding(std::span<const double> x, std::span<double> out) const;

  // Forest prediction (mean of leaf means); used for sanity checks.
  double predict_mean(std::span<const double> x) const;

  std::string to_json() const;
  static RandomForest from_json(const std::string& text);

 private:
  friend RandomForest rf_fit(const Matrix&, std::span<const double>,
                             const RfParams&, Exec);
  std::vector<Tree> trees_;
  int leaf_count_ = 0;
  std::size_t feature_count_ = 0;
  RfParams params_;
};

// Trains the forest on (features, nonnegative absolute residuals).
// Deterministic given params.seed: per-tree seeds are derived with the
// splitmix expansion, so tree construction can run in parallel without
// changing the result.
RandomForest rf_fit(const Matrix& features, std::span<const double> targets,
                    const RfParams& params, Exec exec = Exec::Parallel);

}  // namespace riskcal

#endif
