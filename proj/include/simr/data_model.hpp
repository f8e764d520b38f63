#pragma once

// Dataset representation, predictor standardization, response slicing and
// intraslice moments. Everything downstream consumes SliceMoments.

#include <simr/core.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace simr {

template <typename Scalar = double>
struct Dataset {
  Matrix<Scalar> x;  // n x p, raw scale
  Vector<Scalar> y;  // n
  std::vector<std::string> column_names;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
};

/// Throws unless the dataset is shape-consistent, finite and has n >= p + 2.
template <typename Scalar>
void validate(const Dataset<Scalar>& d) {
  if (d.y.size() != d.x.rows()) {
    throw ShapeMismatch("response length " + std::to_string(d.y.size()) +
                        " does not match predictor rows " + std::to_string(d.x.rows()));
  }
  if (d.p() < 1) throw InvalidArgument("dataset has no predictors");
  if (d.n() < d.p() + 2) {
    throw InvalidArgument("need n >= p + 2 observations (n=" + std::to_string(d.n()) +
                          ", p=" + std::to_string(d.p()) + ")");
  }
  if (!d.x.allFinite() || !d.y.allFinite()) {
    throw NonFiniteInput("dataset contains NaN or infinite entries");
  }
}

enum class CovarianceDenominator {
  kSample,      // n - 1
  kPopulation,  // n
};

template <typename Scalar>
struct StandardizedData {
  Matrix<Scalar> z;               // n x p
  Vector<Scalar> mu_hat;          // p
  Matrix<Scalar> sigma_hat;       // p x p
  Matrix<Scalar> sigma_inv_sqrt;  // p x p, symmetric
  CovarianceDenominator denominator = CovarianceDenominator::kSample;

  Index n() const { return z.rows(); }
  Index p() const { return z.cols(); }
};

/// Sample covariance of the rows of x.
template <typename Derived>
Matrix<typename Derived::Scalar> sample_covariance(
    const Eigen::MatrixBase<Derived>& x,
    CovarianceDenominator denom = CovarianceDenominator::kSample) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.rows();
  const Matrix<Scalar> centered = x.rowwise() - x.colwise().mean();
  const Scalar div = denom == CovarianceDenominator::kSample ? Scalar(n - 1) : Scalar(n);
  Matrix<Scalar> s = (centered.transpose() * centered) / div;
  symmetrize(s);
  return s;
}

/// z_i = sigma^{-1/2} (x_i - mu) with the symmetric inverse square root.
/// Throws SingularCovariance when the smallest covariance eigenvalue is not
/// above 1e-12 times the largest.
template <typename Derived>
StandardizedData<typename Derived::Scalar> standardize(
    const Eigen::MatrixBase<Derived>& x,
    CovarianceDenominator denom = CovarianceDenominator::kSample) {
  using Scalar = typename Derived::Scalar;
  if (!x.allFinite()) throw NonFiniteInput("predictors contain NaN or infinite entries");
  if (x.rows() < 2) throw InvalidArgument("standardize needs at least two rows");

  StandardizedData<Scalar> out;
  out.denominator = denom;
  out.mu_hat = x.colwise().mean().transpose();
  out.sigma_hat = sample_covariance(x, denom);

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(out.sigma_hat);
  const Vector<Scalar>& ev = eig.eigenvalues();  // ascending
  const Scalar largest = ev(ev.size() - 1);
  if (!(largest > Scalar(0)) || !(ev(0) > Scalar(1e-12) * largest)) {
    throw SingularCovariance("sample covariance of predictors is singular");
  }
  const Matrix<Scalar>& v = eig.eigenvectors();
  out.sigma_inv_sqrt = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  symmetrize(out.sigma_inv_sqrt);
  out.z = (x.rowwise() - out.mu_hat.transpose()) * out.sigma_inv_sqrt;
  return out;
}

template <typename Scalar>
StandardizedData<Scalar> standardize(
    const Dataset<Scalar>& d, CovarianceDenominator denom = CovarianceDenominator::kSample) {
  validate(d);
  return standardize(d.x, denom);
}

/// Slice labels are 0-based: 0..H-1.
struct SliceAssignment {
  int H = 0;
  std::vector<int> labels;
  std::vector<Index> n_h;
  VectorXd f_hat;

  Index n() const { return static_cast<Index>(labels.size()); }

  /// Builds the assignment from explicit labels; every slice must be
  /// non-empty.
  static SliceAssignment from_labels(std::vector<int> labels, int H) {
    if (H < 1) throw InvalidArgument("slice count must be positive");
    SliceAssignment s;
    s.H = H;
    s.n_h.assign(static_cast<std::size_t>(H), 0);
    for (int l : labels) {
      if (l < 0 || l >= H) throw InvalidArgument("slice label out of range");
      ++s.n_h[static_cast<std::size_t>(l)];
    }
    for (int h = 0; h < H; ++h) {
      if (s.n_h[static_cast<std::size_t>(h)] == 0) {
        throw TooManySlices("slice " + std::to_string(h + 1) + " is empty");
      }
    }
    s.labels = std::move(labels);
    const double n = static_cast<double>(s.labels.size());
    s.f_hat.resize(H);
    for (int h = 0; h < H; ++h) s.f_hat(h) = static_cast<double>(s.n_h[static_cast<std::size_t>(h)]) / n;
    return s;
  }

  static SliceAssignment single(Index n) {
    return from_labels(std::vector<int>(static_cast<std::size_t>(n), 0), 1);
  }
};

/// Sorts by y and cuts into H slices whose sizes differ by at most one;
/// the first n mod H slices hold the extra observation. Each run of tied
/// responses is then moved wholesale into the slice holding most of it
/// (earliest slice on a count tie).
template <typename Derived>
SliceAssignment slice_by_response(const Eigen::MatrixBase<Derived>& y, int H) {
  const Index n = y.size();
  if (H < 2 || static_cast<Index>(H) * 2 > n) {
    throw TooManySlices("slice count must satisfy 2 <= H <= n/2 (H=" + std::to_string(H) +
                        ", n=" + std::to_string(n) + ")");
  }
  if (!y.allFinite()) throw NonFiniteInput("response contains NaN or infinite entries");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y(a) < y(b); });

  // Position-based labels along the sorted order.
  std::vector<int> by_rank(static_cast<std::size_t>(n));
  const Index base = n / H;
  const Index extra = n % H;
  Index pos = 0;
  for (int h = 0; h < H; ++h) {
    const Index size = base + (h < extra ? 1 : 0);
    for (Index k = 0; k < size; ++k) by_rank[static_cast<std::size_t>(pos++)] = h;
  }

  std::vector<int> counts(static_cast<std::size_t>(H));
  for (Index start = 0; start < n;) {
    Index stop = start + 1;
    while (stop < n && y(order[static_cast<std::size_t>(stop)]) == y(order[static_cast<std::size_t>(start)])) ++stop;
    if (stop - start > 1) {
      std::fill(counts.begin(), counts.end(), 0);
      for (Index k = start; k < stop; ++k) ++counts[static_cast<std::size_t>(by_rank[static_cast<std::size_t>(k)])];
      const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      for (Index k = start; k < stop; ++k) by_rank[static_cast<std::size_t>(k)] = majority;
    }
    start = stop;
  }

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = by_rank[static_cast<std::size_t>(k)];
  return SliceAssignment::from_labels(std::move(labels), H);
}

template <typename Scalar>
struct SliceMoments {
  std::vector<Vector<Scalar>> zbar;   // H entries of length p
  std::vector<Matrix<Scalar>> zzbar;  // H entries of p x p
  Vector<Scalar> f_hat;
  std::vector<Index> n_h;
  Index n = 0;

  int H() const { return static_cast<int>(zbar.size()); }
  Index p() const { return zbar.empty() ? 0 : zbar.front().size(); }
};

/// Intraslice sample means of z and zz'.
template <typename Derived>
SliceMoments<typename Derived::Scalar> intraslice_moments(const Eigen::MatrixBase<Derived>& z,
                                                          const SliceAssignment& s) {
  using Scalar = typename Derived::Scalar;
  if (z.rows() != s.n()) {
    throw ShapeMismatch("standardized data has " + std::to_string(z.rows()) +
                        " rows but slicing covers " + std::to_string(s.n()));
  }
  const Index p = z.cols();
  SliceMoments<Scalar> sm;
  sm.n = z.rows();
  sm.n_h = s.n_h;
  sm.f_hat = s.f_hat.cast<Scalar>();
  sm.zbar.assign(static_cast<std::size_t>(s.H), Vector<Scalar>::Zero(p));
  sm.zzbar.assign(static_cast<std::size_t>(s.H), Matrix<Scalar>::Zero(p, p));
  for (Index i = 0; i < z.rows(); ++i) {
    const auto h = static_cast<std::size_t>(s.labels[static_cast<std::size_t>(i)]);
    const auto zi = z.row(i).transpose();
    sm.zbar[h] += zi;
    sm.zzbar[h].template selfadjointView<Eigen::Lower>().rankUpdate(zi);
  }
  for (std::size_t h = 0; h < sm.zbar.size(); ++h) {
    const Scalar nh = static_cast<Scalar>(s.n_h[h]);
    sm.zbar[h] /= nh;
    Matrix<Scalar> full = sm.zzbar[h].template selfadjointView<Eigen::Lower>();
    sm.zzbar[h] = full / nh;
  }
  return sm;
}

template <typename Scalar>
SliceMoments<Scalar> intraslice_moments(const StandardizedData<Scalar>& sd, const SliceAssignment& s) {
  return intraslice_moments(sd.z, s);
}

}  // namespace simr
