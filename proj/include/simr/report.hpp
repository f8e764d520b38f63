#pragma once

// JSON serialization of estimator, test and selection results.

#include <simr/selection.hpp>

#include <json.hpp>

#include <string>

namespace simr::report {

using nlohmann::json;

json matrix_json(const MatrixXd& m);  // array of rows
json vector_json(const VectorXd& v);

json candidate_json(const CandidateMatrix<double>& cm);

/// {d, lambda, weights (top 50), weights_tail_sum, p_satterthwaite, p_mc, seed, reps, ...}
json dimension_test_json(const DimensionTestResult& r, std::size_t max_weights = 50);
json dimension_sequence_json(const DimensionSequence& seq);

json selection_json(const AlphaSelectionReport& rep);

/// FNV-1a 64-bit digest of the standardized predictors, rendered as hex.
std::string standardization_hash(const StandardizedData<double>& sd);
/// Digest of the slice labels.
std::string slicing_hash(const SliceAssignment& s);

}  // namespace simr::report
