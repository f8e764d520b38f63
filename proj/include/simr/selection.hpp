#pragma once

// Data-driven choice of the SIMR weight alpha: the p-value criterion and
// the bootstrap variability criterion.

#include <simr/inference.hpp>
#include <simr/subspace.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace simr {

/// {0, .01, .05, .1, .2, ..., .9, .95, .99, 1}
std::vector<double> default_alpha_grid();

enum class SelectionCriterion { kPValue, kBootstrap };
enum class Aggregation { kMean, kMedian };

struct AlphaRecord {
  double alpha = 0.0;
  // p-value criterion: one entry per hypothesis d <= 0, 1, ..., p - 1.
  std::vector<double> lambda;
  std::vector<double> p_values;
  std::vector<bool> rejected;
  Index d_hat = 0;
  // bootstrap criterion: one entry per CDRS dimension 1..p-1.
  std::vector<double> score;         // aggregated 1 - r
  std::vector<double> score_spread;  // standard deviation across resamples
};

struct AlphaSelectionReport {
  std::vector<double> alphas;
  SelectionCriterion criterion = SelectionCriterion::kPValue;
  std::vector<AlphaRecord> per_alpha;  // parallel to alphas
  double selected_alpha = 0.0;
  std::optional<Index> selected_d;  // p-value criterion only
  double level = 0.05;
  // bootstrap only
  std::optional<std::uint64_t> seed;
  Index d_fixed = 0;
  int reps = 0;
  int redrawn = 0;
  Aggregation aggregation = Aggregation::kMean;
};

/// Runs the sequential test for each alpha and groups the grid by its
/// inferred dimension. The group chosen is the largest dimension reached by
/// at least a quarter of the (deduplicated) grid, else the most common one;
/// within it the alpha with the smallest p-value for d <= d_hat - 1 wins.
AlphaSelectionReport select_alpha_pvalue(const PreparedData<double>& pd, const std::vector<double>& alphas,
                                         double level);
AlphaSelectionReport select_alpha_pvalue(const Dataset<double>& d, int H, const std::vector<double>& alphas,
                                         double level);

struct BootstrapOptions {
  Index d_fixed = 1;
  int reps = 200;
  std::uint64_t seed = 1;
  Aggregation aggregation = Aggregation::kMean;
};

/// For every alpha, the mean (or median) 1 - r distance between bootstrap
/// re-estimates of the CDRS and the full-sample estimate; the alpha with the
/// lowest score at d_fixed wins. Resamples with a singular covariance or an
/// unusable slicing are redrawn and counted.
AlphaSelectionReport select_alpha_bootstrap(const Dataset<double>& d, int H, const std::vector<double>& alphas,
                                            const BootstrapOptions& opts);

/// Tidy CSV (alpha,d,value). For the p-value criterion d is the dimension
/// claimed by rejecting d - 1; for the bootstrap criterion d is the number
/// of leading eigenvectors.
std::string curves_csv(const AlphaSelectionReport& report);

}  // namespace simr
