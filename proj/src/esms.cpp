#include "peakfilter/model.hpp"
#include "peakfilter/sdp.hpp"

namespace peakfilter {

EsmsCertificate esms_lmi_check(const Matrix& A, const Matrix& G1, std::optional<double> margin) {
  const LmiProblem p = proposition1_problem(A, G1, margin);
  const SdpSolution sol = solve(p);
  EsmsCertificate cert;
  cert.margin = sol.stats.max_margin.value_or(0.0);
  switch (sol.status) {
    case SdpStatus::optimal:
    case SdpStatus::feasible:
      cert.verdict = EsmsCertificate::Verdict::stable;
      cert.Q = sol.assignment.at(var::Q);
      break;
    case SdpStatus::infeasible:
      cert.verdict = EsmsCertificate::Verdict::not_certified;
      break;
    case SdpStatus::numerical_failure:
      cert.verdict = EsmsCertificate::Verdict::solver_failure;
      break;
  }
  return cert;
}

}  // namespace peakfilter
