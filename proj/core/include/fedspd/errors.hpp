#pragma once

#include <stdexcept>
#include <string>

namespace fedspd {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or symmetry violations (non-square symmetrize, mismatched
// operand shapes, asymmetric input to a symmetric routine).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// polar_factor / retract of a matrix whose smallest singular value is below
// the rank tolerance. During aggregation this signals antipodal clients.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

// Mathematical domain violations: non-SPD input where positive definiteness
// is required, non-positive eigenvalue reaching LogEig.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Experiment / federation configuration problems (bad keys, M > N, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset problems: file parse failures, infeasible partitions, splits on
// too-small classes.
class DataError : public Error {
 public:
  using Error::Error;
};

// Sample covariance of a trial with too few samples (T <= d) is singular.
class SingularScmError : public DataError {
 public:
  using DataError::DataError;
};

// Server-side aggregation failures (empty client set, rank-deficient mean).
class AggregationError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedspd
