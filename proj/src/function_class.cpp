#include "riskcal/function_class.hpp"

#include <algorithm>

#include "riskcal/errors.hpp"

namespace riskcal {

Matrix FeatureMap::featurize_all(const Matrix& records) const {
  Matrix out(records.rows, dim());
  for (std::size_t i = 0; i < records.rows; ++i)
    featurize(records.row(i), out.row(i));
  return out;
}

void InterceptMap::featurize(std::span<const double> x,
                             std::span<double> out) const {
  (void)x;
  if (out.size() != 1) throw DataError("InterceptMap: output size mismatch");
  out[0] = 1.0;
}

GroupIndicatorMap::GroupIndicatorMap(std::vector<GroupPredicate> groups)
    : groups_(std::move(groups)) {
  if (groups_.empty()) throw ConfigError("GroupIndicatorMap: no groups");
}

GroupIndicatorMap GroupIndicatorMap::binned(std::size_t feature_index,
                                            std::vector<double> edges) {
  if (!std::is_sorted(edges.begin(), edges.end()))
    throw ConfigError("GroupIndicatorMap: bin edges must be ascending");
  std::vector<GroupPredicate> groups;
  const std::size_t bins = edges.size() + 1;
  for (std::size_t b = 0; b < bins; ++b) {
    groups.push_back([feature_index, edges, b](std::span<const double> x) {
      if (feature_index >= x.size())
        throw DataError("GroupIndicatorMap: record too short for bin feature");
      const double v = x[feature_index];
      const bool above_lo = b == 0 || v > edges[b - 1];
      const bool below_hi = b == edges.size() || v <= edges[b];
      return above_lo && below_hi;
    });
  }
  return GroupIndicatorMap(std::move(groups));
}

void GroupIndicatorMap::featurize(std::span<const double> x,
                                  std::span<double> out) const {
  if (out.size() != groups_.size())
    throw DataError("GroupIndicatorMap: output size mismatch");
  for (std::size_t g = 0; g < groups_.size(); ++g)
    out[g] = groups_[g](x) ? 1.0 : 0.0;
}

LinearEmbeddingMap::LinearEmbeddingMap(std::size_t input_dim,
                                       std::optional<PcaModel> pca,
                                       bool append_intercept)
    : input_dim_(input_dim),
      pca_(std::move(pca)),
      append_intercept_(append_intercept) {
  if (input_dim_ == 0) throw ConfigError("LinearEmbeddingMap: zero input dim");
  if (pca_ && pca_->in_dim != input_dim_)
    throw ConfigError("LinearEmbeddingMap: PCA input dimension mismatch");
  out_dim_ = (pca_ ? pca_->retained : input_dim_) + (append_intercept_ ? 1 : 0);
}

void LinearEmbeddingMap::featurize(std::span<const double> x,
                                   std::span<double> out) const {
  if (x.size() != input_dim_)
    throw DataError("LinearEmbeddingMap: input dimension mismatch");
  if (out.size() != out_dim_)
    throw DataError("LinearEmbeddingMap: output size mismatch");
  if (pca_) {
    pca_project(*pca_, x, out.subspan(0, pca_->retained));
  } else {
    std::copy(x.begin(), x.end(), out.begin());
  }
  if (append_intercept_) out[out_dim_ - 1] = 1.0;
}

RfLeafMap::RfLeafMap(std::shared_ptr<const RandomForest> forest)
    : forest_(std::move(forest)) {
  if (!forest_ || forest_->leaf_count() == 0)
    throw ConfigError("RfLeafMap: missing or empty forest");
}

std::size_t RfLeafMap::dim() const {
  return static_cast<std::size_t>(forest_->leaf_count());
}

void RfLeafMap::featurize(std::span<const double> x,
                          std::span<double> out) const {
  forest_->leaf_embedding(x, out);
}

}  // namespace riskcal
