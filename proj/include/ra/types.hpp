#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed binary input (bad magic, truncation, ...). Message names the
/// byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values encountered during a numerical computation.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace ra
