// Shared numeric aliases and error types for the topicresponse library.

#ifndef TOPICRESPONSE_COMMON_HPP
#define TOPICRESPONSE_COMMON_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace topicresponse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

// Bad user input: unreadable files, malformed records, missing grades.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent dimensions between objects that should agree.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Floor applied to every multiplicative-update denominator.
inline constexpr double kDenominatorFloor = 1e-12;

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace topicresponse

#endif  // TOPICRESPONSE_COMMON_HPP
