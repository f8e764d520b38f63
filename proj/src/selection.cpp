#include <simr/rng.hpp>
#include <simr/selection.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace simr {

std::vector<double> default_alpha_grid() {
  return {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0};
}

namespace {

void check_grid(const std::vector<double>& alphas) {
  if (alphas.empty()) throw InvalidArgument("alpha grid is empty");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha grid values must lie in [0, 1]");
  }
}

std::vector<double> unique_in_order(const std::vector<double>& v) {
  std::vector<double> out;
  for (double a : v) {
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  }
  return out;
}

AlphaRecord record_for(const DimensionSequence& seq) {
  AlphaRecord r;
  r.alpha = seq.alpha;
  r.d_hat = seq.d_hat;
  for (const auto& t : seq.tests) {
    r.lambda.push_back(t.lambda_stat);
    r.p_values.push_back(t.p_satterthwaite());
    r.rejected.push_back(t.reject);
  }
  return r;
}

// Orthonormal x-scale bases for the leading 1..p-1 eigenvectors.
std::vector<MatrixXd> x_scale_bases(const CandidateMatrix<double>& cm, const StandardizedData<double>& sd) {
  std::vector<MatrixXd> out;
  const Index p = cm.p();
  const MatrixXd full = sd.sigma_inv_sqrt * cm.eigenvectors;
  for (Index d = 1; d < p; ++d) out.push_back(orthonormalize(full.leftCols(d)));
  return out;
}

double aggregate(std::vector<double> v, Aggregation how) {
  if (v.empty()) return 0.0;
  if (how == Aggregation::kMean) return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

double spread(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

AlphaSelectionReport select_alpha_pvalue(const PreparedData<double>& pd, const std::vector<double>& alphas,
                                         double level) {
  check_grid(alphas);
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("test level must lie in (0, 1)");
  const std::vector<double> grid = unique_in_order(alphas);

  std::vector<AlphaRecord> records;
  records.reserve(grid.size());
  for (double a : grid) records.push_back(record_for(test_dimension_sequence(pd, a, level)));

  std::map<Index, int> counts;
  for (const auto& r : records) ++counts[r.d_hat];
  Index group = -1;
  for (const auto& [d, c] : counts) {
    if (4 * c >= static_cast<int>(grid.size())) group = std::max(group, d);
  }
  if (group < 0) {
    int best = -1;
    for (const auto& [d, c] : counts) {
      if (c >= best) {
        best = c;
        group = d;
      }
    }
  }
  const auto key_index = static_cast<std::size_t>(group >= 1 ? group - 1 : 0);
  std::size_t chosen = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].d_hat != group) continue;
    if (chosen == records.size() || records[i].p_values[key_index] < records[chosen].p_values[key_index]) {
      chosen = i;
    }
  }

  AlphaSelectionReport rep;
  rep.alphas = alphas;
  rep.criterion = SelectionCriterion::kPValue;
  rep.level = level;
  rep.selected_alpha = records[chosen].alpha;
  rep.selected_d = group;
  for (double a : alphas) {
    const auto it = std::find(grid.begin(), grid.end(), a);
    rep.per_alpha.push_back(records[static_cast<std::size_t>(it - grid.begin())]);
  }
  return rep;
}

AlphaSelectionReport select_alpha_pvalue(const Dataset<double>& d, int H, const std::vector<double>& alphas,
                                         double level) {
  return select_alpha_pvalue(prepare(d, H), alphas, level);
}

AlphaSelectionReport select_alpha_bootstrap(const Dataset<double>& data, int H, const std::vector<double>& alphas,
                                            const BootstrapOptions& opts) {
  check_grid(alphas);
  if (opts.reps < 50) throw InvalidArgument("bootstrap criterion needs at least 50 resamples");
  const Index p = data.p();
  if (opts.d_fixed < 1 || opts.d_fixed >= p) {
    throw InvalidArgument("bootstrap CDRS dimension must satisfy 1 <= d < p");
  }
  const std::vector<double> grid = unique_in_order(alphas);

  const auto sd = standardize(data);
  const auto slices = slice_by_response(data.y, H);
  const auto sm = intraslice_moments(sd, slices);
  std::vector<std::vector<MatrixXd>> reference;  // [alpha][d-1]
  for (double a : grid) reference.push_back(x_scale_bases(simr_matrix(sm, a), sd));

  // distances[alpha][d-1][b]
  std::vector<std::vector<std::vector<double>>> distances(
      grid.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(p - 1)));
  int redrawn = 0;
  const Index n = data.n();
  Dataset<double> boot;
  boot.x.resize(n, p);
  boot.y.resize(n);
  for (int b = 0; b < opts.reps; ++b) {
    std::optional<StandardizedData<double>> bsd;
    std::optional<SliceMoments<double>> bsm;
    for (int attempt = 0; !bsm; ++attempt) {
      if (attempt >= 100) throw NumericalError("bootstrap resamples repeatedly degenerate");
      Rng rng(derive_seed(opts.seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(attempt)}));
      std::uniform_int_distribution<Index> pick(0, n - 1);
      for (Index i = 0; i < n; ++i) {
        const Index j = pick(rng);
        boot.x.row(i) = data.x.row(j);
        boot.y(i) = data.y(j);
      }
      try {
        bsd = standardize(boot);
        bsm = intraslice_moments(*bsd, slice_by_response(boot.y, H));
      } catch (const SingularCovariance&) {
        ++redrawn;
      } catch (const TooManySlices&) {
        ++redrawn;
      }
    }
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const auto bases = x_scale_bases(simr_matrix(*bsm, grid[a]), *bsd);
      for (Index d = 1; d < p; ++d) {
        const auto k = static_cast<std::size_t>(d - 1);
        distances[a][k].push_back(
            subspace_distance(bases[k], reference[a][k], DistanceMetric::kOneMinusR).value);
      }
    }
  }

  std::vector<AlphaRecord> records;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    AlphaRecord r;
    r.alpha = grid[a];
    for (Index d = 1; d < p; ++d) {
      const auto& v = distances[a][static_cast<std::size_t>(d - 1)];
      r.score.push_back(aggregate(v, opts.aggregation));
      r.score_spread.push_back(spread(v));
    }
    records.push_back(std::move(r));
  }
  const auto k = static_cast<std::size_t>(opts.d_fixed - 1);
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].score[k] < records[chosen].score[k]) chosen = i;
  }

  AlphaSelectionReport rep;
  rep.alphas = alphas;
  rep.criterion = SelectionCriterion::kBootstrap;
  rep.selected_alpha = records[chosen].alpha;
  rep.seed = opts.seed;
  rep.d_fixed = opts.d_fixed;
  rep.reps = opts.reps;
  rep.redrawn = redrawn;
  rep.aggregation = opts.aggregation;
  for (double a : alphas) {
    const auto it = std::find(grid.begin(), grid.end(), a);
    rep.per_alpha.push_back(records[static_cast<std::size_t>(it - grid.begin())]);
  }
  return rep;
}

std::string curves_csv(const AlphaSelectionReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "alpha,d,value\n";
  for (const auto& r : report.per_alpha) {
    const auto& values = report.criterion == SelectionCriterion::kPValue ? r.p_values : r.score;
    for (std::size_t k = 0; k < values.size(); ++k) {
      os << r.alpha << ',' << (k + 1) << ',' << values[k] << '\n';
    }
  }
  return os.str();
}

}  // namespace simr
