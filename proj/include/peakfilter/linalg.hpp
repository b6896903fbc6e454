#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace peakfilter {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when matrix shapes do not conform. The message names the offending block.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a documented precondition on scalar arguments is violated.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest real part of the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& m);

/// Kronecker product a ⊗ b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Smallest eigenvalue of the symmetric part of m.
double min_symmetric_eigenvalue(const Matrix& m);

std::string shape_string(const Matrix& m);

}  // namespace peakfilter
