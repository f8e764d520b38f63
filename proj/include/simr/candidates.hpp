#pragma once

// Candidate matrices for the central dimension reduction subspace and the
// eigen-based basis extraction shared by all of them.

#include <simr/data_model.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string_view>

namespace simr {

enum class CandidateKind { kSir, kMzz, kSave, kPhdY, kPhdR, kSimr };

constexpr std::string_view to_string(CandidateKind k) {
  switch (k) {
    case CandidateKind::kSir: return "SIR";
    case CandidateKind::kMzz: return "MZZ";
    case CandidateKind::kSave: return "SAVE";
    case CandidateKind::kPhdY: return "PHD_Y";
    case CandidateKind::kPhdR: return "PHD_R";
    case CandidateKind::kSimr: return "SIMR";
  }
  return "?";
}

/// pHd matrices are indefinite, so their spectrum is ordered by magnitude.
constexpr bool orders_by_magnitude(CandidateKind k) {
  return k == CandidateKind::kPhdY || k == CandidateKind::kPhdR;
}

template <typename Scalar>
struct CandidateMatrix {
  CandidateKind kind = CandidateKind::kSimr;
  std::optional<Scalar> alpha;  // SIMR only
  Matrix<Scalar> m;
  Vector<Scalar> eigenvalues;   // descending (by |value| for pHd)
  Matrix<Scalar> eigenvectors;  // columns match eigenvalues

  Index p() const { return m.rows(); }
};

/// Flips each column so that its largest-magnitude entry is positive.
template <typename Derived>
void canonicalize_signs(Eigen::MatrixBase<Derived>& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, j) < 0) vectors.col(j) = -vectors.col(j);
  }
}

/// Symmetric eigen-decomposition with the kind's ordering and sign
/// convention applied.
template <typename Scalar>
CandidateMatrix<Scalar> make_candidate(CandidateKind kind, Matrix<Scalar> m,
                                       std::optional<Scalar> alpha = std::nullopt) {
  symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(m);
  const Vector<Scalar>& ev = eig.eigenvalues();
  const Index p = m.rows();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  if (orders_by_magnitude(kind)) {
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(ev(a)) > std::abs(ev(b)); });
  } else {
    std::reverse(order.begin(), order.end());
  }
  CandidateMatrix<Scalar> out;
  out.kind = kind;
  out.alpha = alpha;
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (Index j = 0; j < p; ++j) {
    out.eigenvalues(j) = ev(order[static_cast<std::size_t>(j)]);
    out.eigenvectors.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
  }
  canonicalize_signs(out.eigenvectors);
  out.m = std::move(m);
  return out;
}

namespace detail {

// Per-slice terms zbar zbar' and (zzbar - I)^2, evaluated once so that the
// SIR, MZZ and SIMR accumulations agree bit for bit at the endpoints.
template <typename Scalar>
Matrix<Scalar> outer_mean(const SliceMoments<Scalar>& sm, int h) {
  return sm.zbar[h] * sm.zbar[h].transpose();
}

template <typename Scalar>
Matrix<Scalar> squared_deviation(const SliceMoments<Scalar>& sm, int h) {
  const Matrix<Scalar> dev = sm.zzbar[h] - Matrix<Scalar>::Identity(sm.p(), sm.p());
  return dev * dev;
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> sir_kernel(const SliceMoments<Scalar>& sm) {
  const Index p = sm.p();
  Matrix<Scalar> m = Matrix<Scalar>::Zero(p, p);
  for (int h = 0; h < sm.H(); ++h) m += sm.f_hat(h) * detail::outer_mean(sm, h);
  return m;
}

template <typename Scalar>
Matrix<Scalar> mzz_kernel(const SliceMoments<Scalar>& sm) {
  const Index p = sm.p();
  Matrix<Scalar> m = Matrix<Scalar>::Zero(p, p);
  for (int h = 0; h < sm.H(); ++h) m += sm.f_hat(h) * detail::squared_deviation(sm, h);
  return m;
}

template <typename Scalar>
Matrix<Scalar> simr_kernel(const SliceMoments<Scalar>& sm, Scalar alpha) {
  if (alpha == Scalar(1)) return sir_kernel(sm);
  if (alpha == Scalar(0)) return mzz_kernel(sm);
  const Index p = sm.p();
  Matrix<Scalar> m = Matrix<Scalar>::Zero(p, p);
  for (int h = 0; h < sm.H(); ++h) {
    m += sm.f_hat(h) * ((Scalar(1) - alpha) * detail::squared_deviation(sm, h) +
                        alpha * detail::outer_mean(sm, h));
  }
  return m;
}

/// Sum_h f_h zbar_h zbar_h'.
template <typename Scalar>
CandidateMatrix<Scalar> sir_matrix(const SliceMoments<Scalar>& sm) {
  return make_candidate(CandidateKind::kSir, sir_kernel(sm));
}

/// Sum_h f_h [zzbar_h - I]^2.
template <typename Scalar>
CandidateMatrix<Scalar> mzz_matrix(const SliceMoments<Scalar>& sm) {
  return make_candidate(CandidateKind::kMzz, mzz_kernel(sm));
}

/// Sum_h f_h (I - V_h)^2 with V_h the intraslice covariance (denominator n_h).
template <typename Scalar>
CandidateMatrix<Scalar> save_matrix(const SliceMoments<Scalar>& sm) {
  const Index p = sm.p();
  Matrix<Scalar> m = Matrix<Scalar>::Zero(p, p);
  for (int h = 0; h < sm.H(); ++h) {
    if (sm.n_h[static_cast<std::size_t>(h)] < 2) {
      throw DegenerateSlice("SAVE needs at least two observations per slice (slice " +
                            std::to_string(h + 1) + " has " +
                            std::to_string(sm.n_h[static_cast<std::size_t>(h)]) + ")");
    }
    const Matrix<Scalar> dev = Matrix<Scalar>::Identity(p, p) - sm.zzbar[h] +
                               sm.zbar[h] * sm.zbar[h].transpose();
    m.noalias() += sm.f_hat(h) * dev * dev;
  }
  return make_candidate(CandidateKind::kSave, std::move(m));
}

/// Convex combination alpha * SIR + (1 - alpha) * MZZ.
template <typename Scalar>
CandidateMatrix<Scalar> simr_matrix(const SliceMoments<Scalar>& sm, Scalar alpha) {
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1))) {
    throw InvalidArgument("SIMR weight alpha must lie in [0, 1]");
  }
  Matrix<Scalar> m = simr_kernel(sm, alpha);
  return make_candidate(CandidateKind::kSimr, std::move(m), std::optional<Scalar>(alpha));
}

enum class PhdMode { kResponse, kResidual };

/// (1/n) sum_i w_i z_i z_i' with w the centered response, or the residual
/// from the least-squares fit of y on (1, z).
template <typename Scalar, typename Derived>
CandidateMatrix<Scalar> phd_matrix(const StandardizedData<Scalar>& sd,
                                   const Eigen::MatrixBase<Derived>& y, PhdMode mode) {
  const Index n = sd.n();
  const Index p = sd.p();
  if (y.size() != n) throw ShapeMismatch("response length does not match standardized data");
  Vector<Scalar> w;
  if (mode == PhdMode::kResponse) {
    w = y.array() - y.mean();
  } else {
    if (n <= p + 1) throw RankDeficientOLS("residual pHd needs n > p + 1");
    Matrix<Scalar> design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = sd.z;
    Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(design);
    if (qr.rank() < p + 1) throw RankDeficientOLS("least-squares design for residual pHd is singular");
    const Vector<Scalar> yv = y;
    w = yv - design * qr.solve(yv);
  }
  Matrix<Scalar> m = sd.z.transpose() * w.asDiagonal() * sd.z / Scalar(n);
  return make_candidate(mode == PhdMode::kResponse ? CandidateKind::kPhdY : CandidateKind::kPhdR,
                        std::move(m));
}

template <typename Scalar>
struct CdrsEstimate {
  Index d = 0;
  Matrix<Scalar> basis;       // p x d, orthonormal, z scale
  Matrix<Scalar> in_x_scale;  // p x d, unit-length columns
};

/// Columns of sigma_inv_sqrt * v rescaled to unit length.
template <typename Scalar, typename Derived>
Matrix<Scalar> to_x_scale(const StandardizedData<Scalar>& sd, const Eigen::MatrixBase<Derived>& v) {
  Matrix<Scalar> out = sd.sigma_inv_sqrt * v;
  out.colwise().normalize();
  canonicalize_signs(out);
  return out;
}

template <typename Scalar>
CdrsEstimate<Scalar> estimate_cdrs(const CandidateMatrix<Scalar>& cm, Index d,
                                   const StandardizedData<Scalar>& sd) {
  if (d < 1 || d > cm.p()) throw InvalidArgument("CDRS dimension must satisfy 1 <= d <= p");
  CdrsEstimate<Scalar> out;
  out.d = d;
  out.basis = cm.eigenvectors.leftCols(d);
  out.in_x_scale = to_x_scale(sd, out.basis);
  return out;
}

/// Orthonormal basis for the column span of a (thin QR).
template <typename Derived>
Matrix<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::HouseholderQR<Matrix<Scalar>> qr(a);
  return qr.householderQ() * Matrix<Scalar>::Identity(a.rows(), a.cols());
}

}  // namespace simr
