#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

// Error taxonomy. DataError maps to CLI exit code 2, NumericalError to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class TooManySlices : public DataError {
 public:
  using DataError::DataError;
};

class InvalidArgument : public DataError {
 public:
  using DataError::DataError;
};

class HypothesisOutOfRange : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ShapeMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateSlice : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficientOLS : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Symmetrize in place: (a + a') / 2.
template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& a) {
  a = (0.5 * (a + a.transpose())).eval();
}

}  // namespace simr
