#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace scbf {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using BoolMatrixX = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVectorX = Eigen::Array<bool, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Error taxonomy. Every throwing precondition in the library uses one of
// these so callers (and tests) can tell input mistakes from internal drift.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix/vector dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller passed a value outside the documented domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// A requested computation exceeds a configured resource bound.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Server and client structures drifted apart (missed broadcast or prune).
class SyncError : public Error {
 public:
  using Error::Error;
};

// A file cell or token could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A file is structurally unusable (missing column, empty, ragged rows).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Metric is mathematically undefined for the given inputs.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace scbf
