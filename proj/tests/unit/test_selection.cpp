#include "support.hpp"

#include <simr/selection.hpp>
#include <simr/simkit.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

namespace simr {
namespace {

MatrixXd basis(std::initializer_list<Index> axes, Index p = 4) {
  MatrixXd b = MatrixXd::Zero(p, static_cast<Index>(axes.size()));
  Index j = 0;
  for (Index a : axes) b(a, j++) = 1.0;
  return b;
}

double dist(const MatrixXd& a, const MatrixXd& b, DistanceMetric m) { return subspace_distance(a, b, m).value; }

TEST(Subspace, IdenticalSpansHaveZeroDistance) {
  const MatrixXd a = basis({0, 2});
  for (auto m : {DistanceMetric::kOneMinusR, DistanceMetric::kOneMinusQ, DistanceMetric::kArccosQ}) {
    EXPECT_NEAR(dist(a, a, m), 0.0, 1e-12) << to_string(m);
  }
}

TEST(Subspace, OrthogonalLines) {
  EXPECT_NEAR(dist(basis({0}), basis({1}), DistanceMetric::kOneMinusR), 1.0, 1e-15);
  EXPECT_NEAR(dist(basis({0}), basis({1}), DistanceMetric::kOneMinusQ), 1.0, 1e-15);
  EXPECT_NEAR(dist(basis({0}), basis({1}), DistanceMetric::kArccosQ), M_PI / 2, 1e-12);
}

TEST(Subspace, ThreeDimensionalExample) {
  EXPECT_NEAR(dist(basis({0, 1, 2}), basis({0, 1, 3}), DistanceMetric::kOneMinusR), 1.0 - std::sqrt(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(1.0 - std::sqrt(2.0 / 3.0), 0.1835, 1e-4);
}

TEST(Subspace, MixedDimensionsUseLargerDimension) {
  // span{e1} against span{e1, e2}: r^2 = 1 / 2.
  EXPECT_NEAR(dist(basis({0}), basis({0, 1}), DistanceMetric::kOneMinusR), 1.0 - std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(dist(basis({0}), basis({0, 1}), DistanceMetric::kOneMinusQ), 0.0, 1e-12);
}

TEST(Subspace, SymmetricAndReparameterizationInvariant) {
  Rng rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = 5, d = 1 + trial % 4;
    const MatrixXd a = orthonormalize(testing::gaussian(p, d, rng));
    const MatrixXd b = orthonormalize(testing::gaussian(p, d, rng));
    const MatrixXd rot = testing::random_orthogonal(d, rng);
    for (auto m : {DistanceMetric::kOneMinusR, DistanceMetric::kOneMinusQ, DistanceMetric::kArccosQ}) {
      const double base = dist(a, b, m);
      EXPECT_NEAR(base, dist(b, a, m), 1e-10);
      EXPECT_NEAR(base, dist(a * rot, b, m), 1e-10);
      EXPECT_NEAR(base, dist(a, b * rot.transpose(), m), 1e-10);
      if (m != DistanceMetric::kArccosQ) {
        EXPECT_GE(base, 0.0);
        EXPECT_LE(base, 1.0);
      }
    }
  }
}

TEST(Subspace, MetricsAgreeInOrdering) {
  // Rotating e3 toward e4 by a growing angle increases all three distances.
  double last[3] = {-1, -1, -1};
  for (double t = 0.05; t < 1.5; t += 0.1) {
    MatrixXd b = basis({0, 1, 2});
    b(2, 2) = std::cos(t);
    b(3, 2) = std::sin(t);
    const double v[3] = {dist(basis({0, 1, 2}), b, DistanceMetric::kOneMinusR),
                         dist(basis({0, 1, 2}), b, DistanceMetric::kOneMinusQ),
                         dist(basis({0, 1, 2}), b, DistanceMetric::kArccosQ)};
    for (int k = 0; k < 3; ++k) {
      EXPECT_GT(v[k], last[k]);
      last[k] = v[k];
    }
  }
}

TEST(Grid, DefaultValues) {
  const auto g = default_alpha_grid();
  ASSERT_EQ(g.size(), 15u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g[1], 0.01);
  EXPECT_EQ(g[2], 0.05);
  EXPECT_EQ(g[3], 0.1);
  EXPECT_EQ(g[11], 0.9);
  EXPECT_EQ(g[13], 0.99);
  EXPECT_EQ(g.back(), 1.0);
}

TEST(PValueCriterion, SingletonGrid) {
  const auto d = simkit::generate_model_a(300, 1);
  const auto rep = select_alpha_pvalue(d, 6, {0.35}, 0.05);
  EXPECT_EQ(rep.selected_alpha, 0.35);
  ASSERT_EQ(rep.per_alpha.size(), 1u);
}

// Recomputes the documented rule from the per-alpha traces.
double oracle_choice(const AlphaSelectionReport& rep) {
  std::vector<std::pair<double, const AlphaRecord*>> unique;
  for (const auto& r : rep.per_alpha) {
    if (std::none_of(unique.begin(), unique.end(), [&](auto& u) { return u.first == r.alpha; })) {
      unique.push_back({r.alpha, &r});
    }
  }
  std::map<Index, int> count;
  for (auto& u : unique) ++count[u.second->d_hat];
  Index group = -1;
  for (auto& [dh, c] : count) {
    if (4 * c >= static_cast<int>(unique.size())) group = std::max(group, dh);
  }
  if (group < 0) {
    int best = -1;
    for (auto& [dh, c] : count) {
      if (c >= best) {
        best = c;
        group = dh;
      }
    }
  }
  const std::size_t key = group == 0 ? 0 : static_cast<std::size_t>(group - 1);
  double chosen = -1, best_p = 2;
  for (auto& u : unique) {
    if (u.second->d_hat != group) continue;
    if (u.second->p_values[key] < best_p) {
      best_p = u.second->p_values[key];
      chosen = u.first;
    }
  }
  return chosen;
}

TEST(PValueCriterion, FollowsTheGroupingRule) {
  for (std::uint64_t seed : {3u, 4u, 5u, 6u}) {
    const auto d = simkit::generate_model_a(400, seed);
    const auto rep = select_alpha_pvalue(d, 10, default_alpha_grid(), 0.05);
    ASSERT_EQ(rep.per_alpha.size(), 15u);
    EXPECT_EQ(rep.selected_alpha, oracle_choice(rep));
    EXPECT_TRUE(std::find(rep.alphas.begin(), rep.alphas.end(), rep.selected_alpha) != rep.alphas.end());
    for (const auto& r : rep.per_alpha) {
      EXPECT_EQ(r.p_values.size(), 4u);
      EXPECT_EQ(r.lambda.size(), 4u);
    }
  }
}

TEST(PValueCriterion, InvariantToDuplicatedGridPoints) {
  const auto d = simkit::generate_model_a(400, 8);
  const auto pd = prepare(d, 10);
  auto grid = default_alpha_grid();
  const auto base = select_alpha_pvalue(pd, grid, 0.05);
  for (std::size_t k = 0; k < grid.size(); k += 3) {
    auto dup = grid;
    dup.insert(dup.begin() + static_cast<std::ptrdiff_t>(k), grid[k]);
    dup.push_back(grid[k]);
    const auto rep = select_alpha_pvalue(pd, dup, 0.05);
    EXPECT_EQ(rep.selected_alpha, base.selected_alpha);
    EXPECT_EQ(rep.selected_d, base.selected_d);
    EXPECT_EQ(rep.per_alpha.size(), dup.size());
  }
}

TEST(PValueCriterion, Validation) {
  const auto d = simkit::generate_model_a(200, 9);
  EXPECT_THROW(select_alpha_pvalue(d, 5, {}, 0.05), InvalidArgument);
  EXPECT_THROW(select_alpha_pvalue(d, 5, {0.5, 1.2}, 0.05), InvalidArgument);
  EXPECT_THROW(select_alpha_pvalue(d, 5, {0.5}, 0.0), InvalidArgument);
}

TEST(Bootstrap, DeterministicWithFixedSeed) {
  const auto d = simkit::generate_model_a(300, 10);
  BootstrapOptions o;
  o.d_fixed = 3;
  o.reps = 50;
  o.seed = 77;
  const auto a = select_alpha_bootstrap(d, 6, {0.2, 0.6, 1.0}, o);
  const auto b = select_alpha_bootstrap(d, 6, {0.2, 0.6, 1.0}, o);
  EXPECT_EQ(a.selected_alpha, b.selected_alpha);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.per_alpha[i].score, b.per_alpha[i].score);
  EXPECT_EQ(*a.seed, 77u);
  EXPECT_EQ(a.per_alpha[0].score.size(), 3u);  // d = 1, 2, 3
  const auto csv = curves_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "alpha,d,value");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 3);
}

TEST(Bootstrap, Validation) {
  const auto d = simkit::generate_model_a(200, 11);
  BootstrapOptions o;
  o.reps = 49;
  EXPECT_THROW(select_alpha_bootstrap(d, 5, {0.5}, o), InvalidArgument);
  o.reps = 50;
  o.d_fixed = 4;
  EXPECT_THROW(select_alpha_bootstrap(d, 5, {0.5}, o), InvalidArgument);
  o.d_fixed = 0;
  EXPECT_THROW(select_alpha_bootstrap(d, 5, {0.5}, o), InvalidArgument);
}

TEST(Bootstrap, ScoreStableUnderRowPermutation) {
  const auto d = simkit::generate_model_a(400, 12);
  Dataset<double> rev = d;
  rev.x = d.x.colwise().reverse();
  rev.y = d.y.reverse();
  BootstrapOptions o;
  o.d_fixed = 3;
  o.reps = 100;
  const auto a = select_alpha_bootstrap(d, 10, {0.6}, o);
  const auto b = select_alpha_bootstrap(rev, 10, {0.6}, o);
  const double sa = a.per_alpha[0].score[2], sb = b.per_alpha[0].score[2];
  const double se = std::hypot(a.per_alpha[0].score_spread[2], b.per_alpha[0].score_spread[2]) / std::sqrt(100.0);
  EXPECT_LT(std::abs(sa - sb), 4 * se);
}

TEST(Bootstrap, LowVariabilityDoesNotImplyAccuracy) {
  // SIR with a one-dimensional fit is stable yet misses two of the three
  // true directions.
  const auto d = simkit::generate_model_a(400, 13);
  BootstrapOptions o;
  o.d_fixed = 1;
  o.reps = 60;
  const auto rep = select_alpha_bootstrap(d, 10, {1.0}, o);
  EXPECT_LT(rep.per_alpha[0].score[0], 0.02);
  const auto pd = prepare(d, 10);
  const MatrixXd b = orthonormalize(pd.sd.sigma_inv_sqrt * sir_matrix(pd.sm).eigenvectors.leftCols(1));
  EXPECT_GT(subspace_distance(b, MatrixXd::Identity(4, 3), DistanceMetric::kOneMinusR).value, 0.3);
}

TEST(Curves, PValueLayout) {
  const auto d = simkit::generate_model_a(200, 14);
  const auto rep = select_alpha_pvalue(d, 5, {0.0, 0.5}, 0.05);
  std::istringstream in(curves_csv(rep));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "alpha,d,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2 * 4);
}

}  // namespace
}  // namespace simr
