#pragma once

#include "peakfilter/linalg.hpp"

#include <utility>
#include <vector>

namespace peakfilter::detail {

/// Dual-form conic program
///   maximize bᵀy  s.t.  Z_k = C_k − Σ_i y_i A_ik ≽ 0 (dense blocks),
///                       z = c_lp − A_lp·y ≥ 0 (one nonnegative-orthant block),
/// paired with the primal  minimize Σ⟨C_k, X_k⟩ + c_lpᵀx  s.t.  Σ⟨A_ik, X_k⟩ + (A_lpᵀx)_i = b_i.
struct ConicData {
  Index m = 0;
  Vector b;
  std::vector<Matrix> C;
  /// Per dense block: the (variable index, coefficient matrix) pairs that are nonzero.
  std::vector<std::vector<std::pair<Index, Matrix>>> A;
  Vector c_lp;
  Matrix A_lp;
};

struct IpmOptions {
  double tolerance = 1e-9;
  /// Accepted when the iteration stalls: all three measures below this.
  double relaxed_tolerance = 1e-6;
  int max_iterations = 120;
  bool verbose = false;
};

struct IpmResult {
  enum class Status { converged, converged_relaxed, diverged, stalled, iteration_limit, failed };
  Status status = Status::failed;
  Vector y;
  std::vector<Matrix> X;
  std::vector<Matrix> Z;
  Vector x_lp;
  Vector z_lp;
  int iterations = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
};

const char* to_string(IpmResult::Status s);

IpmResult solve_dual_form(const ConicData& data, const IpmOptions& options);

}  // namespace peakfilter::detail
