#include <simr/rng.hpp>
#include <simr/simkit.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace simr::simkit {

Dataset<double> generate_model_a(Index n, std::uint64_t seed) {
  if (n < 10) throw InvalidArgument("model A needs n >= 10");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Dataset<double> d;
  d.x.resize(n, 4);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 4; ++j) d.x(i, j) = normal(rng);
    const double eps = normal(rng);
    d.y(i) = 2.0 * d.x(i, 0) * eps + d.x(i, 1) * d.x(i, 1) + d.x(i, 2);
  }
  d.column_names = {"z1", "z2", "z3", "z4"};
  return d;
}

Dataset<double> generate_null_model(Index n, Index p, std::uint64_t seed) {
  if (n < 10) throw InvalidArgument("null model needs n >= 10");
  if (p < 1) throw InvalidArgument("null model needs p >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Dataset<double> d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) d.x(i, j) = normal(rng);
    d.y(i) = normal(rng);
  }
  for (Index j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
  return d;
}

SimModel model_a() {
  SimModel m;
  m.name = "A";
  m.p = 4;
  m.true_d = 3;
  m.true_cdrs = MatrixXd::Identity(4, 3);
  m.generate = [](Index n, std::uint64_t seed) { return generate_model_a(n, seed); };
  return m;
}

SimModel null_model(Index p) {
  SimModel m;
  m.name = "null";
  m.p = p;
  m.true_d = 0;
  m.true_cdrs = MatrixXd::Zero(p, 0);
  m.generate = [p](Index n, std::uint64_t seed) { return generate_null_model(n, p, seed); };
  return m;
}

double mc_weighted_chisq_quantile(const std::vector<double>& weights, double prob, std::int64_t reps,
                                  std::uint64_t seed) {
  if (reps < 10000) throw InvalidArgument("Monte-Carlo quantile needs at least 10000 draws");
  if (!(prob > 0.0 && prob < 1.0)) throw InvalidArgument("quantile probability must lie in (0, 1)");
  auto draws = sample_weighted_chisq(weights, reps, seed);
  const auto k = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(reps))) - 1;
  std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k), draws.end());
  return draws[k];
}

std::vector<double> sir_chisq_pvalues(const SliceMoments<double>& sm, Index n) {
  const auto sir = sir_matrix(sm);
  const Index p = sm.p();
  const int H = sm.H();
  std::vector<double> out;
  for (Index d = 0; d < p; ++d) {
    const double stat = static_cast<double>(n) * sir.eigenvalues.tail(p - d).sum();
    const double df = static_cast<double>((p - d) * (H - d - 1));
    out.push_back(df > 0 ? chisq_upper_tail(stat, df) : 1.0);
  }
  return out;
}

std::string to_string(StudyMethod m) { return m == StudyMethod::kSimr ? "SIMR" : "SIR"; }

namespace {

StudyMethod parse_method(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "SIMR") return StudyMethod::kSimr;
  if (u == "SIR") return StudyMethod::kSir;
  if (u == "SAVE" || u == "PHD" || u == "R-PHD" || u == "Y-PHD" || u == "PHD_R" || u == "PHD_Y") {
    throw InvalidArgument("method '" + s +
                          "' is not available in power studies: only SIMR (weighted chi-squared test) "
                          "and SIR (classical chi-squared test) are supported");
  }
  throw InvalidArgument("unknown study method '" + s + "'");
}

double one_minus_r_x_scale(const CandidateMatrix<double>& cm, const StandardizedData<double>& sd,
                           const MatrixXd& truth) {
  const Index d = truth.cols();
  if (d == 0) return 0.0;
  const MatrixXd basis = orthonormalize(sd.sigma_inv_sqrt * cm.eigenvectors.leftCols(d));
  return subspace_distance(basis, truth, DistanceMetric::kOneMinusR).value;
}

struct MethodOutcome {
  std::vector<bool> rejected;
  double one_minus_r = 0.0;
  double alpha = -1.0;
  Index d_hat = 0;
};

// outcomes[h_index][method_index]
using ReplicateOutcome = std::vector<std::vector<MethodOutcome>>;

ReplicateOutcome run_replicate(const PowerStudyConfig& cfg, const SimModel& model, Index n, int rep,
                               int& redraws) {
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100) throw NumericalError("simulation replicate repeatedly degenerate");
    const auto data = model.generate(
        n, derive_seed(cfg.seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep),
                                  static_cast<std::uint64_t>(attempt)}));
    try {
      ReplicateOutcome out;
      for (int H : cfg.h_list) {
        const auto pd = prepare(data, H);
        std::vector<MethodOutcome> per_method;
        for (StudyMethod m : cfg.methods) {
          MethodOutcome o;
          if (m == StudyMethod::kSimr) {
            AlphaRecord rec;
            if (cfg.alpha_policy.pvalue_criterion) {
              const auto report = select_alpha_pvalue(pd, cfg.alpha_policy.grid, cfg.level);
              const auto it = std::find(report.alphas.begin(), report.alphas.end(), report.selected_alpha);
              rec = report.per_alpha[static_cast<std::size_t>(it - report.alphas.begin())];
            } else {
              const auto seq = test_dimension_sequence(pd, cfg.alpha_policy.fixed_alpha, cfg.level);
              rec.alpha = seq.alpha;
              rec.d_hat = seq.d_hat;
              for (const auto& t : seq.tests) rec.rejected.push_back(t.reject);
            }
            o.rejected = rec.rejected;
            o.alpha = rec.alpha;
            o.d_hat = rec.d_hat;
            o.one_minus_r = one_minus_r_x_scale(simr_matrix(pd.sm, rec.alpha), pd.sd, model.true_cdrs);
          } else {
            const auto pv = sir_chisq_pvalues(pd.sm, n);
            o.d_hat = static_cast<Index>(pv.size());
            for (std::size_t k = 0; k < pv.size(); ++k) {
              o.rejected.push_back(pv[k] < cfg.level);
              if (!o.rejected.back() && o.d_hat == static_cast<Index>(pv.size())) o.d_hat = static_cast<Index>(k);
            }
            o.one_minus_r = one_minus_r_x_scale(sir_matrix(pd.sm), pd.sd, model.true_cdrs);
          }
          per_method.push_back(std::move(o));
        }
        out.push_back(std::move(per_method));
      }
      return out;
    } catch (const NumericalError&) {
      ++redraws;
    } catch (const TooManySlices&) {
      ++redraws;
    }
  }
}

}  // namespace

PowerStudyConfig parse_study_config(const nlohmann::json& j) {
  PowerStudyConfig cfg;
  try {
    if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
    if (cfg.model != "A" && cfg.model != "null") {
      throw InvalidArgument("unknown study model '" + cfg.model + "' (expected \"A\" or \"null\")");
    }
    if (j.contains("p")) cfg.null_p = j.at("p").get<Index>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("n")) cfg.n_list = j.at("n").get<std::vector<Index>>();
    if (j.contains("slices")) cfg.h_list = j.at("slices").get<std::vector<int>>();
    if (j.contains("reps")) cfg.reps = j.at("reps").get<int>();
    if (j.contains("level")) cfg.level = j.at("level").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("alpha_policy")) {
      const auto& a = j.at("alpha_policy");
      if (a.contains("fixed")) {
        cfg.alpha_policy.pvalue_criterion = false;
        cfg.alpha_policy.fixed_alpha = a.at("fixed").get<double>();
      }
      if (a.contains("grid")) cfg.alpha_policy.grid = a.at("grid").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed study config: ") + e.what());
  }
  if (cfg.methods.empty() || cfg.n_list.empty() || cfg.h_list.empty()) {
    throw InvalidArgument("study config needs at least one method, sample size and slice count");
  }
  if (cfg.reps < 1) throw InvalidArgument("study config needs reps >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InvalidArgument("study level must lie in (0, 1)");
  return cfg;
}

nlohmann::json to_json(const PowerStudyConfig& cfg) {
  nlohmann::json j;
  j["model"] = cfg.model;
  if (cfg.model == "null") j["p"] = cfg.null_p;
  std::vector<std::string> methods;
  for (auto m : cfg.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["n"] = cfg.n_list;
  j["slices"] = cfg.h_list;
  j["reps"] = cfg.reps;
  j["level"] = cfg.level;
  j["seed"] = cfg.seed;
  if (cfg.alpha_policy.pvalue_criterion) {
    j["alpha_policy"] = {{"criterion", "pvalue"}, {"grid", cfg.alpha_policy.grid}};
  } else {
    j["alpha_policy"] = {{"fixed", cfg.alpha_policy.fixed_alpha}};
  }
  return j;
}

double PowerCell::rate(std::size_t row) const {
  return reps() == 0 ? 0.0 : static_cast<double>(rejections.at(row)) / static_cast<double>(reps());
}

double PowerCell::mean_one_minus_r() const {
  if (one_minus_r.empty()) return 0.0;
  double s = 0.0;
  for (double v : one_minus_r) s += v;
  return s / static_cast<double>(one_minus_r.size());
}

const PowerCell& PowerTable::cell(StudyMethod m, Index n, int H) const {
  for (const auto& c : cells) {
    if (c.method == m && c.n == n && c.H == H) return c;
  }
  throw InvalidArgument("power table has no cell for " + to_string(m) + ", n=" + std::to_string(n) +
                        ", H=" + std::to_string(H));
}

PowerTable run_power_study(const PowerStudyConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("power study needs reps >= 1");
  const SimModel model = cfg.model == "null" ? null_model(cfg.null_p) : model_a();

  PowerTable table;
  table.config = cfg;
  table.p = model.p;
  table.true_d = model.true_d;
  table.below_recommended_reps = cfg.reps < 50;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::max(1, std::min(cfg.threads > 0 ? cfg.threads : static_cast<int>(hw), cfg.reps));

  for (Index n : cfg.n_list) {
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
    std::vector<int> redraws(static_cast<std::size_t>(cfg.reps), 0);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&]() {
      for (int rep = next++; rep < cfg.reps; rep = next++) {
        try {
          outcomes[static_cast<std::size_t>(rep)] =
              run_replicate(cfg, model, n, rep, redraws[static_cast<std::size_t>(rep)]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t hi = 0; hi < cfg.h_list.size(); ++hi) {
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        PowerCell c;
        c.method = cfg.methods[mi];
        c.n = n;
        c.H = cfg.h_list[hi];
        c.rejections.assign(static_cast<std::size_t>(model.p), 0);
        for (const auto& rep : outcomes) {
          const auto& o = rep[hi][mi];
          for (std::size_t k = 0; k < o.rejected.size(); ++k) c.rejections[k] += o.rejected[k] ? 1 : 0;
          c.one_minus_r.push_back(o.one_minus_r);
          c.d_hat.push_back(o.d_hat);
          if (c.method == StudyMethod::kSimr) c.selected_alpha.push_back(o.alpha);
        }
        table.cells.push_back(std::move(c));
      }
    }
    for (int r : redraws) table.redraws += r;
  }
  return table;
}

std::string power_table_csv(const PowerTable& t) {
  std::ostringstream os;
  os.precision(17);
  os << "method,n,H,row,value\n";
  for (const auto& c : t.cells) {
    for (std::size_t k = 0; k < c.rejections.size(); ++k) {
      os << to_string(c.method) << ',' << c.n << ',' << c.H << ",d<=" << k << ',' << c.rate(k) << '\n';
    }
    os << to_string(c.method) << ',' << c.n << ',' << c.H << ",mean(1-r)," << c.mean_one_minus_r() << '\n';
  }
  return os.str();
}

nlohmann::json power_table_json(const PowerTable& t) {
  nlohmann::json j;
  j["config"] = to_json(t.config);
  j["p"] = t.p;
  j["true_d"] = t.true_d;
  j["redraws"] = t.redraws;
  j["below_recommended_reps"] = t.below_recommended_reps;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : t.cells) {
    nlohmann::json cj;
    cj["method"] = to_string(c.method);
    cj["n"] = c.n;
    cj["H"] = c.H;
    cj["reps"] = c.reps();
    cj["rejections"] = c.rejections;
    std::vector<double> rates;
    for (std::size_t k = 0; k < c.rejections.size(); ++k) rates.push_back(c.rate(k));
    cj["rates"] = rates;
    cj["mean_one_minus_r"] = c.mean_one_minus_r();
    cj["d_hat"] = c.d_hat;
    if (!c.selected_alpha.empty()) cj["selected_alpha"] = c.selected_alpha;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

std::string render_power_table(const PowerTable& t) {
  std::ostringstream os;
  const auto& cfg = t.config;
  os << "Empirical power and size of marginal dimension tests (level " << cfg.level << ", " << cfg.reps
     << " replicates, seed " << cfg.seed << ")\n";
  for (Index n : cfg.n_list) {
    os << "\nn=" << n << '\n';
    os << std::left << std::setw(12) << "";
    for (auto m : cfg.methods) {
      for (int H : cfg.h_list) {
        std::ostringstream head;
        head << to_string(m) << " H=" << H;
        os << std::right << std::setw(12) << head.str();
      }
    }
    os << '\n';
    auto row = [&](const std::string& label, auto value) {
      os << std::left << std::setw(12) << label;
      for (auto m : cfg.methods) {
        for (int H : cfg.h_list) {
          std::ostringstream cell;
          cell << std::setprecision(4) << value(t.cell(m, n, H));
          os << std::right << std::setw(12) << cell.str();
        }
      }
      os << '\n';
    };
    for (Index k = 0; k < t.p; ++k) {
      row("d<=" + std::to_string(k), [k](const PowerCell& c) { return c.rate(static_cast<std::size_t>(k)); });
    }
    row("mean(1-r)", [](const PowerCell& c) { return c.mean_one_minus_r(); });
  }
  return os.str();
}

}  // namespace simr::simkit
