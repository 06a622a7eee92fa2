#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace drscc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Closed-box membership slack used for overlap and containment tests.
inline constexpr double kBoxTolerance = 1e-9;

// Raised for malformed inputs whose shape is wrong (dimension or count
// mismatch), as opposed to well-formed inputs that violate an invariant.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace drscc
