#ifndef RISKCAL_FUNCTION_CLASS_HPP
#define RISKCAL_FUNCTION_CLASS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "riskcal/matrix.hpp"
#include "riskcal/pca.hpp"
#include "riskcal/random_forest.hpp"

namespace riskcal {

// Maps an input record to the feature vector Phi(x) whose span defines the
// threshold function class {x -> Phi(x).theta}. Implementations are
// immutable and featurize is pure, so maps are safe to share across workers.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;
  virtual std::size_t dim() const = 0;
  virtual void featurize(std::span<const double> x,
                         std::span<double> out) const = 0;

  std::vector<double> featurize(std::span<const double> x) const {
    std::vector<double> out(dim());
    featurize(x, std::span<double>(out));
    return out;
  }

  // Featurize a whole table of records.
  Matrix featurize_all(const Matrix& records) const;
};

// Constant class: Phi(x) = [1]. Recovers the marginal baseline.
class InterceptMap final : public FeatureMap {
 public:
  using FeatureMap::featurize;
  std::size_t dim() const override { return 1; }
  void featurize(std::span<const double> x,
                 std::span<double> out) const override;
};

using GroupPredicate = std::function<bool(std::span<const double>)>;

// Possibly overlapping 0/1 group indicators.
class GroupIndicatorMap final : public FeatureMap {
 public:
  using FeatureMap::featurize;
  explicit GroupIndicatorMap(std::vector<GroupPredicate> groups);

  // Disjoint bins of one raw feature, split at the given ascending edges
  // (dim = edges.size() + 1).
  static GroupIndicatorMap binned(std::size_t feature_index,
                                  std::vector<double> edges);

  std::size_t dim() const override { return groups_.size(); }
  void featurize(std::span<const double> x,
                 std::span<double> out) const override;

 private:
  std::vector<GroupPredicate> groups_;
};

// Precomputed embedding vectors, optionally PCA-compressed, optionally with
// a trailing intercept coordinate.
class LinearEmbeddingMap final : public FeatureMap {
 public:
  using FeatureMap::featurize;
  LinearEmbeddingMap(std::size_t input_dim, std::optional<PcaModel> pca,
                     bool append_intercept);

  std::size_t dim() const override { return out_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  void featurize(std::span<const double> x,
                 std::span<double> out) const override;

 private:
  std::size_t input_dim_;
  std::optional<PcaModel> pca_;
  bool append_intercept_;
  std::size_t out_dim_;
};

// Leaf-membership indicators of a trained forest: exactly tree_count ones
// per input.
class RfLeafMap final : public FeatureMap {
 public:
  using FeatureMap::featurize;
  explicit RfLeafMap(std::shared_ptr<const RandomForest> forest);

  std::size_t dim() const override;
  void featurize(std::span<const double> x,
                 std::span<double> out) const override;
  const RandomForest& forest() const { return *forest_; }

 private:
  std::shared_ptr<const RandomForest> forest_;
};

}  // namespace riskcal

#endif
