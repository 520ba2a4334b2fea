#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungforge/domain_gap.hpp"
#include "lungforge/errors.hpp"

namespace lungforge {

MdsResult classical_mds(std::span<const double> distances, std::size_t n, std::size_t dim) {
  if (distances.size() != n * n) throw_dimension("distance matrix is not n x n");
  if (dim < 1 || n < dim + 1) throw_parameter("classical MDS needs n >= dim + 1");
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d2(ni, ni);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(distances[i * n + j]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = distances[i * n + j];
      if (!std::isfinite(a) || std::abs(a - distances[j * n + i]) > 1e-12 * std::max(1.0, scale)) {
        throw_parameter("distance matrix must be finite and symmetric");
      }
      d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a * a;
    }
  }
  // B = -1/2 J D^2 J with J = I - 11^T / n.
  const Eigen::VectorXd row_mean = d2.rowwise().mean();
  const Eigen::RowVectorXd col_mean = d2.colwise().mean();
  const double grand = d2.mean();
  Eigen::MatrixXd b = d2;
  b.colwise() -= row_mean;
  b.rowwise() -= col_mean;
  b.array() += grand;
  b *= -0.5;
  b = 0.5 * (b + b.transpose()).eval();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  // Eigen returns ascending eigenvalues.
  MdsResult r;
  r.dim = dim;
  r.coords.assign(n * dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    const Eigen::Index col = ni - 1 - static_cast<Eigen::Index>(k);
    const double lambda = eig.eigenvalues()(col);
    r.eigenvalues.push_back(lambda);
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const double s = std::sqrt(std::max(0.0, lambda));
    for (std::size_t i = 0; i < n; ++i) r.coords[i * dim + k] = v(static_cast<Eigen::Index>(i)) * s;
  }
  return r;
}

MdsResult classical_mds(const DistanceMatrix& d, std::size_t dim) {
  return classical_mds(d.d, d.size(), dim);
}

}  // namespace lungforge
