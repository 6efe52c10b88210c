#ifndef RISKCAL_PCA_HPP
#define RISKCAL_PCA_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "riskcal/matrix.hpp"

namespace riskcal {

// Principal components of centered data. Rows of `components` are
// orthonormal; `retained` is the smallest count whose cumulative explained
// variance ratio reaches the fit target.
struct PcaModel {
  std::size_t in_dim = 0;
  std::size_t retained = 0;
  std::vector<double> mean;                      // in_dim
  std::vector<double> components;                // retained x in_dim, row-major
  std::vector<double> explained_variance_ratio;  // retained entries
};

// Eigendecomposition of the sample covariance. Errors on zero-variance data.
PcaModel pca_fit(const Matrix& data, double target_evr);

void pca_project(const PcaModel& model, std::span<const double> x,
                 std::span<double> out);

}  // namespace riskcal

#endif
