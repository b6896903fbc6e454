#pragma once

#include "peakfilter/lmi.hpp"

#include <optional>
#include <string>
#include <vector>

namespace peakfilter {

enum class SdpStatus { optimal, feasible, infeasible, numerical_failure };

const char* to_string(SdpStatus s);

struct SolverStats {
  int iterations = 0;
  double duality_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  /// Largest uniform slack t of the max-margin problem, when it was solved.
  std::optional<double> max_margin;
  /// The ±variable_bound box carried non-negligible multipliers, so an infeasibility
  /// verdict holds only inside the box.
  bool bound_active = false;
  std::string note;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  Assignment assignment;
  std::optional<double> objective_value;
  SolverStats stats;

  bool ok() const { return status == SdpStatus::optimal || status == SdpStatus::feasible; }
};

struct SolverOptions {
  double tolerance = 1e-9;
  int max_iterations = 120;
  /// Box |x_i| ≤ variable_bound on every scalar decision coordinate.
  double variable_bound = 1e7;
  /// Cap on the uniform slack in feasibility mode.
  double margin_cap = 1.0;
  /// Verification tolerance applied before a solution is returned as feasible/optimal.
  double verify_tolerance = 1e-6;
  /// Defaults to the PEAKFILTER_SOLVER_VERBOSE environment variable.
  std::optional<bool> verbose;
};

/// Feasibility problems return the max-margin point; problems with an objective are minimized.
SdpSolution solve(const LmiProblem& problem, const SolverOptions& options = {});

/// Minimizes the problem's linear objective; throws PreconditionError when there is none.
SdpSolution minimize(const LmiProblem& problem, const SolverOptions& options = {});

struct ConstraintCheck {
  std::string label;
  /// Smallest eigenvalue of the sign-adjusted grid (positive means the strict inequality holds).
  double min_eigenvalue = 0.0;
  double margin = 0.0;
  /// min_eigenvalue − margin.
  double slack = 0.0;
  bool satisfied = false;
};

struct VerificationReport {
  std::vector<ConstraintCheck> constraints;
  bool satisfied = false;
  double worst_slack = 0.0;
  std::string worst_label;
};

/// Dense eigenvalue check of every instantiated constraint. A constraint passes when
/// slack ≥ −tol·max(1, max|grid entry|).
VerificationReport verify(const LmiProblem& problem, const Assignment& values, double tol = 1e-6);

/// SDPA sparse format (primal form  min cᵀx  s.t.  Σ F_i x_i − F_0 ≽ 0), one dense block per
/// constraint plus one diagonal block holding the variable box.
std::string to_sdpa(const LmiProblem& problem, double variable_bound = 1e7);

}  // namespace peakfilter
