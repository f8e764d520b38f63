#pragma once

// Simulation kit: data generators, the power/size study runner and
// Monte-Carlo reference quantiles.

#include <simr/selection.hpp>

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace simr::simkit {

struct SimModel {
  std::string name;
  Index p = 0;
  Index true_d = 0;
  MatrixXd true_cdrs;  // p x true_d, orthonormal
  std::function<Dataset<double>(Index n, std::uint64_t seed)> generate;
};

/// y = 2 z1 eps + z2^2 + z3 with (z, eps) iid N(0, I_5); CDRS span{e1, e2, e3}.
Dataset<double> generate_model_a(Index n, std::uint64_t seed);

/// x ~ N(0, I_p) independent of y ~ N(0, 1).
Dataset<double> generate_null_model(Index n, Index p, std::uint64_t seed);

SimModel model_a();
SimModel null_model(Index p);

/// Empirical prob-quantile of sum_i a_i K_i, K_i iid chi2_1.
double mc_weighted_chisq_quantile(const std::vector<double>& weights, double prob, std::int64_t reps,
                                  std::uint64_t seed);

/// Classical SIR chi-squared marginal tests: n * (sum of the trailing p - d
/// eigenvalues of M_SIR) against chi2 with (p - d)(H - d - 1) df. Returns
/// one p-value per d = 0..p-1 (1 when the df is not positive).
std::vector<double> sir_chisq_pvalues(const SliceMoments<double>& sm, Index n);

enum class StudyMethod { kSimr, kSir };
std::string to_string(StudyMethod m);

struct AlphaPolicy {
  bool pvalue_criterion = true;
  double fixed_alpha = 0.5;
  std::vector<double> grid = default_alpha_grid();
};

struct PowerStudyConfig {
  std::string model = "A";
  Index null_p = 4;  // predictors for the null model
  std::vector<StudyMethod> methods{StudyMethod::kSimr, StudyMethod::kSir};
  std::vector<Index> n_list{400};
  std::vector<int> h_list{5, 10};
  int reps = 200;
  double level = 0.05;
  AlphaPolicy alpha_policy;
  std::uint64_t seed = 20100101;
  int threads = 0;  // 0: hardware concurrency
};

/// Parses a study file. Methods SAVE and pHd are refused: their tests are
/// not part of this toolkit.
PowerStudyConfig parse_study_config(const nlohmann::json& j);
nlohmann::json to_json(const PowerStudyConfig& cfg);

struct PowerCell {
  StudyMethod method = StudyMethod::kSimr;
  Index n = 0;
  int H = 0;
  std::vector<int> rejections;         // per hypothesis row d <= k
  std::vector<double> one_minus_r;     // per replicate
  std::vector<double> selected_alpha;  // per replicate, SIMR only
  std::vector<Index> d_hat;            // per replicate

  int reps() const { return static_cast<int>(one_minus_r.size()); }
  double rate(std::size_t row) const;
  double mean_one_minus_r() const;
};

struct PowerTable {
  PowerStudyConfig config;
  Index p = 0;
  Index true_d = 0;
  std::vector<PowerCell> cells;
  int redraws = 0;
  bool below_recommended_reps = false;  // reps < 50

  const PowerCell& cell(StudyMethod m, Index n, int H) const;
};

PowerTable run_power_study(const PowerStudyConfig& cfg);

std::string power_table_csv(const PowerTable& t);
nlohmann::json power_table_json(const PowerTable& t);
/// Text rendering laid out like the published table: one block per n,
/// columns method x H, rows d <= k then mean(1 - r).
std::string render_power_table(const PowerTable& t);

}  // namespace simr::simkit
