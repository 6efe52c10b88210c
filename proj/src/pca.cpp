#include "riskcal/pca.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "riskcal/errors.hpp"

namespace riskcal {

PcaModel pca_fit(const Matrix& data, double target_evr) {
  if (!(target_evr > 0.0 && target_evr <= 1.0))
    throw ConfigError("pca_fit: target explained-variance ratio must be in (0, 1]");
  if (data.rows < 2 || data.cols == 0)
    throw DataError("pca_fit: need at least two rows");
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          data.at(i, j);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov =
      x.transpose() * x / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw DataError("pca_fit: eigendecomposition failed");

  // Ascending eigenvalues; read from the back.
  const Eigen::VectorXd evals = solver.eigenvalues();
  double total = 0.0;
  for (Eigen::Index k = 0; k < evals.size(); ++k)
    total += std::max(evals(k), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    throw DataError("pca_fit: zero-variance data");

  PcaModel model;
  model.in_dim = d;
  model.mean.assign(mean.data(), mean.data() + d);

  double cum = 0.0;
  std::size_t retained = 0;
  for (std::size_t r = 0; r < d; ++r) {
    const double ev =
        std::max(evals(static_cast<Eigen::Index>(d - 1 - r)), 0.0);
    cum += ev / total;
    model.explained_variance_ratio.push_back(ev / total);
    ++retained;
    if (cum >= target_evr - 1e-12) break;
  }
  model.retained = retained;
  model.components.resize(retained * d);
  for (std::size_t r = 0; r < retained; ++r) {
    Eigen::VectorXd v = solver.eigenvectors().col(
        static_cast<Eigen::Index>(d - 1 - r));
    // Canonical sign: largest-magnitude coordinate positive.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j)
      model.components[r * d + j] = v(static_cast<Eigen::Index>(j));
  }
  return model;
}

void pca_project(const PcaModel& model, std::span<const double> x,
                 std::span<double> out) {
  if (x.size() != model.in_dim)
    throw DataError("pca_project: input dimension mismatch");
  if (out.size() != model.retained)
    throw DataError("pca_project: output dimension mismatch");
  for (std::size_t r = 0; r < model.retained; ++r) {
    double s = 0.0;
    const double* row = model.components.data() + r * model.in_dim;
    for (std::size_t j = 0; j < model.in_dim; ++j)
      s += row[j] * (x[j] - model.mean[j]);
    out[r] = s;
  }
}

}  // namespace riskcal
