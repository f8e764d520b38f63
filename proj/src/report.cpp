#include <simr/report.hpp>

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace simr::report {

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ULL;
    }
  }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json candidate_json(const CandidateMatrix<double>& cm) {
  json j;
  j["kind"] = std::string(to_string(cm.kind));
  j["alpha"] = cm.alpha ? json(*cm.alpha) : json(nullptr);
  j["m"] = matrix_json(cm.m);
  j["eigenvalues"] = vector_json(cm.eigenvalues);
  j["eigenvectors"] = matrix_json(cm.eigenvectors);
  return j;
}

json dimension_test_json(const DimensionTestResult& r, std::size_t max_weights) {
  json j;
  j["d"] = r.d_tested;
  j["lambda"] = r.lambda_stat;
  const auto& w = r.law.weights;
  const std::size_t keep = std::min(max_weights, w.size());
  j["weights"] = std::vector<double>(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(keep));
  double tail = 0.0;
  for (std::size_t i = keep; i < w.size(); ++i) tail += w[i];
  j["weights_tail_sum"] = tail;
  j["weights_count"] = r.law.count;
  j["weights_clipped"] = r.law.clipped;
  j["p_satterthwaite"] = r.satterthwaite.p_value;
  j["satterthwaite_df"] = r.satterthwaite.df;
  j["satterthwaite_scale"] = r.satterthwaite.scale;
  j["zero_weight_law"] = r.satterthwaite.zero_weight;
  if (r.montecarlo) {
    j["p_mc"] = r.montecarlo->p_value;
    j["p_mc_se"] = r.montecarlo->std_error;
    j["seed"] = r.montecarlo->seed;
    j["reps"] = r.montecarlo->reps;
  } else {
    j["p_mc"] = nullptr;
    j["seed"] = nullptr;
    j["reps"] = nullptr;
  }
  j["reject"] = r.reject;
  j["boundary_tie"] = r.boundary_tie;
  return j;
}

json dimension_sequence_json(const DimensionSequence& seq) {
  json j;
  j["alpha"] = seq.alpha;
  j["level"] = seq.level;
  j["d_hat"] = seq.d_hat;
  json tests = json::array();
  for (const auto& t : seq.tests) tests.push_back(dimension_test_json(t));
  j["tests"] = std::move(tests);
  return j;
}

json selection_json(const AlphaSelectionReport& rep) {
  json j;
  j["criterion"] = rep.criterion == SelectionCriterion::kPValue ? "pvalue" : "bootstrap";
  j["alphas"] = rep.alphas;
  j["selected_alpha"] = rep.selected_alpha;
  j["selected_d"] = rep.selected_d ? json(*rep.selected_d) : json(nullptr);
  json per = json::array();
  for (const auto& r : rep.per_alpha) {
    json a;
    a["alpha"] = r.alpha;
    if (rep.criterion == SelectionCriterion::kPValue) {
      a["d_hat"] = r.d_hat;
      a["lambda"] = r.lambda;
      a["p_values"] = r.p_values;
    } else {
      a["score"] = r.score;
      a["score_spread"] = r.score_spread;
    }
    per.push_back(std::move(a));
  }
  j["per_alpha"] = std::move(per);
  if (rep.criterion == SelectionCriterion::kPValue) {
    j["level"] = rep.level;
  } else {
    j["seed"] = rep.seed ? json(*rep.seed) : json(nullptr);
    j["d_fixed"] = rep.d_fixed;
    j["reps"] = rep.reps;
    j["redrawn"] = rep.redrawn;
    j["aggregation"] = rep.aggregation == Aggregation::kMean ? "mean" : "median";
  }
  return j;
}

std::string standardization_hash(const StandardizedData<double>& sd) {
  Fnv1a h;
  const std::int64_t dims[2] = {sd.z.rows(), sd.z.cols()};
  h.bytes(dims, sizeof dims);
  h.bytes(sd.z.data(), static_cast<std::size_t>(sd.z.size()) * sizeof(double));
  return h.hex();
}

std::string slicing_hash(const SliceAssignment& s) {
  Fnv1a h;
  const std::int64_t H = s.H;
  h.bytes(&H, sizeof H);
  h.bytes(s.labels.data(), s.labels.size() * sizeof(int));
  return h.hex();
}

}  // namespace simr::report
