#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace convexreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One design point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raised when a caller violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a randomized construction runs out of its attempt budget.
class BudgetExhausted : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw PreconditionError(message);
  }
}

}  // namespace convexreg
