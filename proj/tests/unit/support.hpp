#pragma once

#include <simr/data_model.hpp>
#include <simr/rng.hpp>

#include <random>

namespace simr::testing {

inline MatrixXd gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> nd;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline MatrixXd random_orthogonal(Index p, Rng& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(p, p, rng));
  return qr.householderQ();
}

// Correlated, shifted predictors with a nonlinear response.
inline Dataset<double> random_dataset(Index n, Index p, Rng& rng) {
  Dataset<double> d;
  const MatrixXd mix = MatrixXd::Identity(p, p) + 0.4 * gaussian(p, p, rng);
  d.x = gaussian(n, p, rng) * mix;
  d.x.rowwise() += (3.0 * gaussian(1, p, rng)).row(0);
  const VectorXd noise = gaussian(n, 1, rng).col(0);
  d.y = d.x.col(0).array().square() + d.x.col(p > 1 ? 1 : 0).array() + 0.5 * noise.array();
  return d;
}

}  // namespace simr::testing
