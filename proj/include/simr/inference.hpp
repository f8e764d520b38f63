#pragma once

// Weighted chi-squared marginal dimension tests for SIMR.
//
// Layout conventions. For p predictors and H slices:
//   U_n = (U_{n,1} | U_{n,2}), p x (pH + H)
//   Vec(O_n, M_n, mu) stacks Vec(E(xx'|h)) for h = 1..H (p^2 H entries),
//   then E(x|h) for h = 1..H (pH entries), then mu (p entries).
// Vec is column-major throughout.

#include <simr/candidates.hpp>
#include <simr/chisq.hpp>
#include <simr/rng.hpp>

#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace simr {

template <typename Scalar>
struct UhatDecomposition {
  Matrix<Scalar> u1;  // p x pH
  Matrix<Scalar> u2;  // p x H
  Matrix<Scalar> u;   // p x (pH + H)
  Index d_hypothesis = 0;
  Scalar alpha = 0;
  Matrix<Scalar> gamma11;  // p x d
  Matrix<Scalar> gamma12;  // p x (p - d)
  Matrix<Scalar> gamma21;  // (pH + H) x d
  Matrix<Scalar> gamma22;  // (pH + H) x (pH + H - d)
  Vector<Scalar> singular_values;  // descending, length p
  bool boundary_tie = false;       // sigma_d == sigma_{d+1} to working precision

  Index p() const { return u.rows(); }
  Index cols() const { return u.cols(); }
};

template <typename Scalar>
Matrix<Scalar> uhat_matrix(const SliceMoments<Scalar>& sm, Scalar alpha) {
  const Index p = sm.p();
  const int H = sm.H();
  Matrix<Scalar> u(p, p * H + H);
  const Scalar a1 = std::sqrt(Scalar(1) - alpha);
  const Scalar a2 = std::sqrt(alpha);
  for (int h = 0; h < H; ++h) {
    const Scalar g = std::sqrt(sm.f_hat(h));
    u.block(0, h * p, p, p) = a1 * g * (sm.zzbar[h] - Matrix<Scalar>::Identity(p, p));
    u.col(p * H + h) = a2 * g * sm.zbar[h];
  }
  return u;
}

/// Builds U_n for the given weight and splits its full SVD at the
/// hypothesised dimension d (0 <= d <= p; d == p gives empty tail blocks).
template <typename Scalar>
UhatDecomposition<Scalar> build_uhat(const SliceMoments<Scalar>& sm, Scalar alpha, Index d) {
  const Index p = sm.p();
  const int H = sm.H();
  if (d < 0 || d > p) {
    throw HypothesisOutOfRange("hypothesised dimension " + std::to_string(d) +
                               " outside [0, " + std::to_string(p) + "]");
  }
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1))) {
    throw InvalidArgument("SIMR weight alpha must lie in [0, 1]");
  }
  UhatDecomposition<Scalar> ud;
  ud.d_hypothesis = d;
  ud.alpha = alpha;
  ud.u = uhat_matrix(sm, alpha);
  ud.u1 = ud.u.leftCols(p * H);
  ud.u2 = ud.u.rightCols(H);

  Eigen::JacobiSVD<Matrix<Scalar>> svd(ud.u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ud.singular_values = svd.singularValues();
  const Matrix<Scalar>& left = svd.matrixU();
  const Matrix<Scalar>& right = svd.matrixV();
  const Index c = ud.u.cols();
  ud.gamma11 = left.leftCols(d);
  ud.gamma12 = left.rightCols(p - d);
  ud.gamma21 = right.leftCols(d);
  ud.gamma22 = right.rightCols(c - d);
  if (d > 0 && d < p) {
    const Scalar top = std::max(ud.singular_values(0), std::numeric_limits<Scalar>::min());
    ud.boundary_tie = std::abs(ud.singular_values(d - 1) - ud.singular_values(d)) <=
                      Scalar(1e-10) * top;
  }
  return ud;
}

/// n times the sum of the squared singular values beyond the first d.
template <typename Scalar>
Scalar lambda_statistic(const UhatDecomposition<Scalar>& ud, Index n) {
  const Index p = ud.singular_values.size();
  return Scalar(n) * ud.singular_values.tail(p - ud.d_hypothesis).squaredNorm();
}

template <typename Scalar>
struct InferenceWorkspace {
  Index p = 0;
  int H = 0;
  Matrix<Scalar> m_n;  // p x H
  Matrix<Scalar> n_n;  // 1 x pH
  Matrix<Scalar> o_n;  // p x pH
  Matrix<Scalar> c_n;  // p x pH
  Vector<Scalar> mu_hat;
  Vector<Scalar> shift;  // location subtracted from x before forming moments
  Matrix<Scalar> delta0;
  Matrix<Scalar> gdot;
  Matrix<Scalar> delta;
  Vector<Scalar> f_vec;
  Vector<Scalar> g_diag;
  Matrix<Scalar> f_centering;  // I_H - f 1'
};

/// Plug-in estimate of the asymptotic covariance of
/// sqrt(n) Vec(O_n, M_n, mu_hat). Intraslice covariances use denominator n_h
/// and the lower-right block is the covariance of x with denominator n.
template <typename Derived>
Matrix<typename Derived::Scalar> estimate_delta0(const Eigen::MatrixBase<Derived>& x,
                                                 const SliceAssignment& s) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.rows();
  const Index p = x.cols();
  const int H = s.H;
  if (s.n() != n) throw ShapeMismatch("slicing does not cover the predictor rows");
  for (int h = 0; h < H; ++h) {
    if (s.n_h[static_cast<std::size_t>(h)] < 2) {
      throw DegenerateSlice("covariance estimate needs at least two observations per slice");
    }
  }
  const Index pp = p * p;
  const Index q = pp + p;  // per-observation vector (Vec(xx'), x)
  const Index dim = pp * H + p * H + p;

  std::vector<Vector<Scalar>> mean(static_cast<std::size_t>(H), Vector<Scalar>::Zero(q));
  std::vector<Matrix<Scalar>> second(static_cast<std::size_t>(H), Matrix<Scalar>::Zero(q, q));
  Vector<Scalar> v(q);
  for (Index i = 0; i < n; ++i) {
    const auto h = static_cast<std::size_t>(s.labels[static_cast<std::size_t>(i)]);
    const auto xi = x.row(i).transpose();
    for (Index b = 0; b < p; ++b) v.segment(b * p, p) = xi * xi(b);
    v.tail(p) = xi;
    mean[h] += v;
    second[h].template selfadjointView<Eigen::Lower>().rankUpdate(v);
  }

  Matrix<Scalar> delta0 = Matrix<Scalar>::Zero(dim, dim);
  const Index m_off = pp * H;
  const Index mu_off = m_off + p * H;
  for (int h = 0; h < H; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    const Scalar nh = static_cast<Scalar>(s.n_h[hs]);
    const Scalar fh = s.f_hat(h);
    mean[hs] /= nh;
    Matrix<Scalar> cov = second[hs].template selfadjointView<Eigen::Lower>();
    cov /= nh;
    cov.noalias() -= mean[hs] * mean[hs].transpose();
    symmetrize(cov);

    const auto c11 = cov.topLeftCorner(pp, pp);
    const auto c21 = cov.bottomLeftCorner(p, pp);
    const auto c22 = cov.bottomRightCorner(p, p);
    delta0.block(h * pp, h * pp, pp, pp) = c11 / fh;
    delta0.block(m_off + h * p, h * pp, p, pp) = c21 / fh;
    delta0.block(m_off + h * p, m_off + h * p, p, p) = c22 / fh;
    delta0.block(mu_off, h * pp, p, pp) = c21;
    delta0.block(mu_off, m_off + h * p, p, p) = c22;
  }
  delta0.block(mu_off, mu_off, p, p) = sample_covariance(x, CovarianceDenominator::kPopulation);
  // Upper blocks by symmetric completion.
  delta0.template triangularView<Eigen::StrictlyUpper>() = delta0.transpose();
  return delta0;
}

/// Derivative of Vec(O, M, mu) -> Vec(C, M) with C = O - M (I_H (x) mu') - mu N.
template <typename Scalar>
Matrix<Scalar> gdot_matrix(const Matrix<Scalar>& m_n, const Vector<Scalar>& mu) {
  const Index p = m_n.rows();
  const Index H = m_n.cols();
  const Index pp = p * p;
  const Matrix<Scalar> ip = Matrix<Scalar>::Identity(p, p);
  const Matrix<Scalar> ih = Matrix<Scalar>::Identity(H, H);
  const Matrix<Scalar> iph = Matrix<Scalar>::Identity(p * H, p * H);

  Matrix<Scalar> g = Matrix<Scalar>::Zero(pp * H + p * H, pp * H + p * H + p);
  g.topLeftCorner(pp * H, pp * H).setIdentity();
  const Matrix<Scalar> mu_ip = Eigen::kroneckerProduct(mu, ip);
  g.block(0, pp * H, pp * H, p * H) =
      -Matrix<Scalar>(Eigen::kroneckerProduct(ih, mu_ip)) - Matrix<Scalar>(Eigen::kroneckerProduct(iph, mu));
  Matrix<Scalar> g13(pp * H, p);
  for (Index h = 0; h < H; ++h) {
    const Vector<Scalar> mh = m_n.col(h);
    g13.block(h * pp, 0, pp, p) = Eigen::kroneckerProduct(ip, mh);
  }
  const Vector<Scalar> vec_m = Eigen::Map<const Vector<Scalar>>(m_n.data(), p * H);
  g13 += Matrix<Scalar>(Eigen::kroneckerProduct(vec_m, ip));
  g.block(0, pp * H + p * H, pp * H, p) = -g13;
  g.block(pp * H, pp * H, p * H, p * H).setIdentity();
  return g;
}

/// Delta-method covariance of sqrt(n) Vec(C_n, M_n).
template <typename Scalar>
Matrix<Scalar> estimate_delta(const Matrix<Scalar>& delta0, const Matrix<Scalar>& m_n,
                              const Vector<Scalar>& mu) {
  const Index p = m_n.rows();
  const Index H = m_n.cols();
  const Index dim = p * p * H + p * H + p;
  if (delta0.rows() != dim || delta0.cols() != dim || mu.size() != p) {
    throw ShapeMismatch("delta0, M_n and mu have inconsistent shapes");
  }
  const Matrix<Scalar> g = gdot_matrix(m_n, mu);
  Matrix<Scalar> delta = g * delta0 * g.transpose();
  symmetrize(delta);
  return delta;
}

/// Moment matrices M_n, N_n, O_n, C_n of x (after subtracting `shift`) and
/// the covariance estimates shared by every alpha.
template <typename Scalar>
InferenceWorkspace<Scalar> build_workspace(const Matrix<Scalar>& x, const SliceAssignment& s,
                                           const Vector<Scalar>& shift) {
  const Index p = x.cols();
  const int H = s.H;
  InferenceWorkspace<Scalar> ws;
  ws.p = p;
  ws.H = H;
  ws.shift = shift;
  const Matrix<Scalar> xs = x.rowwise() - shift.transpose();
  ws.mu_hat = xs.colwise().mean().transpose();

  ws.m_n = Matrix<Scalar>::Zero(p, H);
  ws.o_n = Matrix<Scalar>::Zero(p, p * H);
  for (Index i = 0; i < xs.rows(); ++i) {
    const int h = s.labels[static_cast<std::size_t>(i)];
    const auto xi = xs.row(i).transpose();
    ws.m_n.col(h) += xi;
    ws.o_n.block(0, h * p, p, p).noalias() += xi * xi.transpose();
  }
  for (int h = 0; h < H; ++h) {
    const Scalar nh = static_cast<Scalar>(s.n_h[static_cast<std::size_t>(h)]);
    ws.m_n.col(h) /= nh;
    ws.o_n.block(0, h * p, p, p) /= nh;
  }
  ws.n_n = Eigen::Map<const Matrix<Scalar>>(ws.m_n.data(), 1, p * H);
  const Matrix<Scalar> ih = Matrix<Scalar>::Identity(H, H);
  ws.c_n = ws.o_n - ws.m_n * Matrix<Scalar>(Eigen::kroneckerProduct(ih, ws.mu_hat.transpose())) -
           ws.mu_hat * ws.n_n;

  ws.delta0 = estimate_delta0(xs, s);
  ws.gdot = gdot_matrix(ws.m_n, ws.mu_hat);
  ws.delta = ws.gdot * ws.delta0 * ws.gdot.transpose();
  symmetrize(ws.delta);

  ws.f_vec = s.f_hat.cast<Scalar>();
  ws.g_diag = ws.f_vec.cwiseSqrt();
  ws.f_centering = ih - ws.f_vec * Vector<Scalar>::Ones(H).transpose();
  return ws;
}

/// Block-diagonal K: sqrt(1-alpha) (F G) (x) sigma^{-1/2} and sqrt(alpha) F G.
template <typename Scalar>
Matrix<Scalar> k_matrix(const InferenceWorkspace<Scalar>& ws, const Matrix<Scalar>& sigma_inv_sqrt,
                        Scalar alpha) {
  const Index p = ws.p;
  const int H = ws.H;
  const Matrix<Scalar> fg = ws.f_centering * ws.g_diag.asDiagonal();
  Matrix<Scalar> k = Matrix<Scalar>::Zero(p * H + H, p * H + H);
  k.topLeftCorner(p * H, p * H) =
      std::sqrt(Scalar(1) - alpha) * Matrix<Scalar>(Eigen::kroneckerProduct(fg, sigma_inv_sqrt));
  k.bottomRightCorner(H, H) = std::sqrt(alpha) * fg;
  return k;
}

/// Plug-in covariance W of sqrt(n) Vec(Gamma12' U_n Gamma22).
template <typename Scalar>
Matrix<Scalar> w_matrix(const Matrix<Scalar>& delta, const UhatDecomposition<Scalar>& ud,
                        const StandardizedData<Scalar>& sd, const InferenceWorkspace<Scalar>& ws) {
  const Index p = ws.p;
  const int H = ws.H;
  const Index dim = p * p * H + p * H;
  if (ud.p() != p || ud.cols() != p * H + H || sd.p() != p || delta.rows() != dim ||
      delta.cols() != dim) {
    throw ShapeMismatch("delta, decomposition, standardization and workspace disagree on p or H");
  }
  const Matrix<Scalar> left = ud.gamma12.transpose() * sd.sigma_inv_sqrt;  // (p-d) x p
  const Matrix<Scalar> right = k_matrix(ws, sd.sigma_inv_sqrt, ud.alpha) * ud.gamma22;
  const Matrix<Scalar> a = Eigen::kroneckerProduct(right.transpose(), left);
  Matrix<Scalar> w = a * delta * a.transpose();
  symmetrize(w);
  return w;
}

template <typename Scalar>
WeightedChisqLaw estimate_w(const Matrix<Scalar>& delta, const UhatDecomposition<Scalar>& ud,
                            const StandardizedData<Scalar>& sd, const InferenceWorkspace<Scalar>& ws) {
  const Index count = ud.gamma12.cols() * ud.gamma22.cols();
  if (count == 0) return make_law({}, 0);
  const Matrix<Scalar> w = w_matrix(delta, ud, sd, ws);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(w, Eigen::EigenvaluesOnly);
  std::vector<double> ev(static_cast<std::size_t>(eig.eigenvalues().size()));
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) ev[static_cast<std::size_t>(i)] = static_cast<double>(eig.eigenvalues()(i));
  return make_law(std::move(ev), count);
}

struct MonteCarloOptions {
  std::int64_t reps = 200000;
  std::uint64_t seed = 20240601;
  int shards = 1;
};

struct DimensionTestResult {
  Index d_tested = 0;
  double lambda_stat = 0.0;
  WeightedChisqLaw law;
  SatterthwaiteFit satterthwaite;
  std::optional<MonteCarloPValue> montecarlo;
  bool reject = false;
  bool boundary_tie = false;

  double p_satterthwaite() const { return satterthwaite.p_value; }
};

struct DimensionSequence {
  double alpha = 0.0;
  double level = 0.05;
  std::vector<DimensionTestResult> tests;  // d <= 0, 1, ..., p - 1
  Index d_hat = 0;                         // first non-rejected hypothesis
};

/// Everything about a dataset and slicing that does not depend on alpha.
template <typename Scalar>
struct PreparedData {
  StandardizedData<Scalar> sd;
  SliceAssignment slices;
  SliceMoments<Scalar> sm;
  InferenceWorkspace<Scalar> ws;

  Index n() const { return sd.n(); }
  Index p() const { return sd.p(); }
};

/// Moments for the covariance estimates are formed from x centred at its
/// sample mean; the weights of W do not depend on the location of x.
template <typename Scalar>
PreparedData<Scalar> prepare(const Dataset<Scalar>& d, int H,
                             CovarianceDenominator denom = CovarianceDenominator::kSample) {
  PreparedData<Scalar> pd;
  pd.sd = standardize(d, denom);
  pd.slices = slice_by_response(d.y, H);
  pd.sm = intraslice_moments(pd.sd, pd.slices);
  pd.ws = build_workspace(d.x, pd.slices, pd.sd.mu_hat);
  return pd;
}

template <typename Scalar>
DimensionTestResult test_dimension(const PreparedData<Scalar>& pd, Scalar alpha, Index d, double level,
                                   const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  const UhatDecomposition<Scalar> ud = build_uhat(pd.sm, alpha, d);
  DimensionTestResult r;
  r.d_tested = d;
  r.lambda_stat = static_cast<double>(lambda_statistic(ud, pd.n()));
  r.law = estimate_w(pd.ws.delta, ud, pd.sd, pd.ws);
  r.satterthwaite = satterthwaite_pvalue(r.lambda_stat, r.law);
  if (mc) {
    r.montecarlo = montecarlo_pvalue(r.lambda_stat, r.law, mc->reps,
                                     derive_seed(mc->seed, {static_cast<std::uint64_t>(d)}), mc->shards);
  }
  r.reject = r.satterthwaite.p_value < level;
  r.boundary_tie = ud.boundary_tie;
  return r;
}

/// Tests d <= 0, 1, ..., p - 1 in order; all results are kept.
template <typename Scalar>
DimensionSequence test_dimension_sequence(const PreparedData<Scalar>& pd, Scalar alpha, double level,
                                          const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("test level must lie in (0, 1)");
  DimensionSequence seq;
  seq.alpha = static_cast<double>(alpha);
  seq.level = level;
  const Index p = pd.p();
  bool stopped = false;
  seq.d_hat = p;
  for (Index d = 0; d < p; ++d) {
    seq.tests.push_back(test_dimension(pd, alpha, d, level, mc));
    if (!stopped && !seq.tests.back().reject) {
      seq.d_hat = d;
      stopped = true;
    }
  }
  return seq;
}

template <typename Scalar>
DimensionSequence test_dimension_sequence(const Dataset<Scalar>& d, int H, Scalar alpha, double level,
                                          const std::optional<MonteCarloOptions>& mc = std::nullopt) {
  return test_dimension_sequence(prepare(d, H), alpha, level, mc);
}

}  // namespace simr
