#include <simr/chisq.hpp>
#include <simr/rng.hpp>

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <numeric>

namespace simr {

double WeightedChisqLaw::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

double WeightedChisqLaw::sum_squares() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s;
}

WeightedChisqLaw make_law(std::vector<double> eigenvalues, Index count) {
  WeightedChisqLaw law;
  law.count = count;
  for (double& e : eigenvalues) {
    if (e < 0.0) {
      law.clipped += -e;
      e = 0.0;
    }
  }
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  eigenvalues.resize(static_cast<std::size_t>(count), 0.0);
  law.weights = std::move(eigenvalues);
  return law;
}

double chisq_upper_tail(double x, double df) {
  if (!(x > 0.0)) return 1.0;
  if (!(df > 0.0)) throw InvalidArgument("chi-squared degrees of freedom must be positive");
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

SatterthwaiteFit satterthwaite_pvalue(double lambda_stat, const WeightedChisqLaw& law) {
  SatterthwaiteFit fit;
  const double s1 = law.sum();
  const double s2 = law.sum_squares();
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    fit.zero_weight = true;
    fit.p_value = 1.0;
    return fit;
  }
  fit.scale = s2 / s1;
  fit.df = s1 * s1 / s2;
  fit.p_value = chisq_upper_tail(lambda_stat / fit.scale, fit.df);
  return fit;
}

std::vector<double> sample_weighted_chisq(const std::vector<double>& weights, std::int64_t reps,
                                          std::uint64_t seed) {
  std::vector<double> positive;
  for (double w : weights) {
    if (w > 0.0) positive.push_back(w);
  }
  std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(reps, 0)), 0.0);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (double& v : out) {
    double s = 0.0;
    for (double w : positive) {
      const double z = normal(rng);
      s += w * z * z;
    }
    v = s;
  }
  return out;
}

MonteCarloPValue montecarlo_pvalue(double lambda_stat, const WeightedChisqLaw& law, std::int64_t reps,
                                   std::uint64_t seed, int shards) {
  if (reps < 1000) throw InvalidArgument("Monte-Carlo p-value needs at least 1000 draws");
  shards = std::max(1, shards);
  auto run_shard = [&](int s) {
    const std::int64_t share = reps / shards + (s < reps % shards ? 1 : 0);
    const auto draws = sample_weighted_chisq(law.weights, share,
                                             derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    return static_cast<std::int64_t>(
        std::count_if(draws.begin(), draws.end(), [&](double v) { return v > lambda_stat; }));
  };
  std::int64_t exceed = 0;
  if (shards == 1) {
    exceed = run_shard(0);
  } else {
    std::vector<std::future<std::int64_t>> parts;
    for (int s = 0; s < shards; ++s) parts.push_back(std::async(std::launch::async, run_shard, s));
    for (auto& f : parts) exceed += f.get();
  }
  MonteCarloPValue out;
  out.seed = seed;
  out.reps = reps;
  out.p_value = static_cast<double>(exceed) / static_cast<double>(reps);
  out.std_error = std::sqrt(out.p_value * (1.0 - out.p_value) / static_cast<double>(reps));
  return out;
}

}  // namespace simr
