// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace herl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
// Row-major so that a sample is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point left (or was never inside) the open Poincare ball.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// Operand dimensions or curvatures disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violated a documented precondition (config, argument range).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity produced where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Quantity undefined at this input (e.g. the angle of a zero vector).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace herl
