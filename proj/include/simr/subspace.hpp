#pragma once

// Distances between column spans. With P_a, P_b the orthogonal projectors
// and theta_i the principal angles:
//   r   = sqrt(trace(P_a P_b) / max(d_a, d_b))   (trace correlation)
//   q   = prod_i cos(theta_i) over the min(d_a, d_b) principal angles
// reported as 1 - r, 1 - q or arccos(q).

#include <simr/core.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string_view>

namespace simr {

enum class DistanceMetric { kOneMinusR, kOneMinusQ, kArccosQ };

constexpr std::string_view to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::kOneMinusR: return "ONE_MINUS_R";
    case DistanceMetric::kOneMinusQ: return "ONE_MINUS_Q";
    case DistanceMetric::kArccosQ: return "ARCCOS_Q";
  }
  return "?";
}

struct SubspaceDistance {
  DistanceMetric metric = DistanceMetric::kOneMinusR;
  double value = 0.0;
};

/// Cosines of the principal angles, descending. Inputs need orthonormal
/// columns.
template <typename DA, typename DB>
Vector<typename DA::Scalar> principal_cosines(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.rows() != b.rows()) throw ShapeMismatch("bases live in different ambient dimensions");
  const Matrix<Scalar> cross = a.transpose() * b;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(cross);
  return svd.singularValues().cwiseMin(Scalar(1)).cwiseMax(Scalar(0));
}

/// Principal angles in radians, ascending.
template <typename DA, typename DB>
Vector<typename DA::Scalar> principal_angles(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return principal_cosines(a, b).array().acos().matrix();
}

template <typename DA, typename DB>
double trace_correlation(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != b.rows()) throw ShapeMismatch("bases live in different ambient dimensions");
  const auto dmax = static_cast<double>(std::max(a.cols(), b.cols()));
  if (dmax == 0) return 1.0;
  const double t = static_cast<double>((a.transpose() * b).squaredNorm());
  return std::sqrt(std::clamp(t / dmax, 0.0, 1.0));
}

template <typename DA, typename DB>
SubspaceDistance subspace_distance(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                                   DistanceMetric metric) {
  SubspaceDistance out;
  out.metric = metric;
  if (metric == DistanceMetric::kOneMinusR) {
    out.value = 1.0 - trace_correlation(a, b);
  } else {
    const double q = static_cast<double>(principal_cosines(a, b).prod());
    out.value = metric == DistanceMetric::kOneMinusQ ? 1.0 - q : std::acos(std::clamp(q, 0.0, 1.0));
  }
  return out;
}

}  // namespace simr
