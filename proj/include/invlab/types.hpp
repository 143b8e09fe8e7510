#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace invlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Samples are stored one per row so a row is contiguous.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Base for every error the library raises. Subclasses let callers tell
// precondition failures from numerical ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NoPositiveExamples : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace invlab
