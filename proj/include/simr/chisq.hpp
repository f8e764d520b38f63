#pragma once

// Linear combinations of independent chi-squared(1) variables: the limit law
// of the dimension test statistic, its two-moment Satterthwaite tail and a
// Monte-Carlo reference.

#include <simr/core.hpp>

#include <cstdint>
#include <vector>

namespace simr {

struct WeightedChisqLaw {
  std::vector<double> weights;  // descending, all >= 0, zero-padded to count
  Index count = 0;
  double clipped = 0.0;  // sum of |negative eigenvalues| removed by clipping

  double sum() const;
  double sum_squares() const;
};

/// Builds a law from raw (possibly slightly negative) eigenvalues: negatives
/// clipped to zero, sorted descending, zero-padded to `count`.
WeightedChisqLaw make_law(std::vector<double> eigenvalues, Index count);

/// Upper tail P(chi2_df > x); fractional df allowed.
double chisq_upper_tail(double x, double df);

struct SatterthwaiteFit {
  double p_value = 1.0;
  double scale = 0.0;  // theta = sum a^2 / sum a
  double df = 0.0;     // (sum a)^2 / sum a^2
  bool zero_weight = false;
};

SatterthwaiteFit satterthwaite_pvalue(double lambda_stat, const WeightedChisqLaw& law);

struct MonteCarloPValue {
  double p_value = 1.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  std::int64_t reps = 0;
};

/// Fraction of simulated sum_i a_i K_i exceeding lambda_stat. Deterministic
/// for a fixed (seed, reps, shards) triple; shards run concurrently.
MonteCarloPValue montecarlo_pvalue(double lambda_stat, const WeightedChisqLaw& law, std::int64_t reps,
                                   std::uint64_t seed, int shards = 1);

/// Draws from sum_i a_i K_i with K_i iid chi2_1.
std::vector<double> sample_weighted_chisq(const std::vector<double>& weights, std::int64_t reps,
                                          std::uint64_t seed);

}  // namespace simr
