#include "peakfilter/sdp.hpp"

#include "ipm.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace peakfilter {

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::feasible: return "feasible";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

namespace {

bool env_verbose() {
  const char* v = std::getenv("PEAKFILTER_SOLVER_VERBOSE");
  return v && *v && std::string(v) != "0";
}

// Constraint k as  sense·F0 − margin·I + Σ_i x_i·sense·F_i ≽ 0.
struct CompiledBlock {
  Matrix constant;
  std::vector<std::pair<Index, Matrix>> coef;
};

std::vector<CompiledBlock> compile(const LmiProblem& p) {
  std::vector<CompiledBlock> out;
  for (const auto& c : p.constraints()) {
    const double s = c.sense() == Sense::positive_definite ? 1.0 : -1.0;
    CompiledBlock b;
    b.constant = s * c.constant_grid() - c.margin() * Matrix::Identity(c.size(), c.size());
    for (const auto& name : c.variables()) {
      const MatrixVariable& v = p.variable(name);
      const Index off = p.offset_of(name);
      for (Index k = 0; k < v.scalar_count(); ++k) {
        Matrix f = c.linear_grid(name, v.basis(k));
        if (f.cwiseAbs().maxCoeff() == 0.0) continue;
        b.coef.emplace_back(off + k, s * f);
      }
    }
    std::sort(b.coef.begin(), b.coef.end(),
              [](const auto& a, const auto& b2) { return a.first < b2.first; });
    out.push_back(std::move(b));
  }
  return out;
}

Vector objective_vector(const LmiProblem& p) {
  Vector c = Vector::Zero(p.scalar_count());
  if (!p.objective()) return c;
  for (const auto& [name, w] : p.objective()->weights) {
    const MatrixVariable& v = p.variable(name);
    const Index off = p.offset_of(name);
    for (Index k = 0; k < v.scalar_count(); ++k) c(off + k) += w.cwiseProduct(v.basis(k)).sum();
  }
  return c;
}

// Box rows  R − x_i ≥ 0,  R + x_i ≥ 0  for the first m coordinates of an (m + extra)-vector.
void add_box(detail::ConicData& d, Index m, double bound) {
  const Index rows = d.c_lp.size();
  d.c_lp.conservativeResize(rows + 2 * m);
  d.A_lp.conservativeResize(rows + 2 * m, d.m);
  d.A_lp.bottomRows(2 * m).setZero();
  for (Index i = 0; i < m; ++i) {
    d.c_lp(rows + 2 * i) = bound;
    d.A_lp(rows + 2 * i, i) = 1.0;
    d.c_lp(rows + 2 * i + 1) = bound;
    d.A_lp(rows + 2 * i + 1, i) = -1.0;
  }
}

// Data for  max −cᵀx  (phase B) or  max t  with  F(x) ≽ t·I, t ≤ cap  (phase A).
detail::ConicData conic_data(const std::vector<CompiledBlock>& blocks, Index m, const Vector& c,
                             bool max_margin, double cap, double bound) {
  detail::ConicData d;
  d.m = max_margin ? m + 1 : m;
  d.b = Vector::Zero(d.m);
  if (max_margin) {
    d.b(m) = 1.0;
  } else {
    d.b.head(m) = -c;
  }
  for (const auto& blk : blocks) {
    d.C.push_back(blk.constant);
    std::vector<std::pair<Index, Matrix>> a;
    for (const auto& [i, f] : blk.coef) a.emplace_back(i, -f);
    if (max_margin) a.emplace_back(m, Matrix::Identity(blk.constant.rows(), blk.constant.cols()));
    d.A.push_back(std::move(a));
  }
  d.c_lp.resize(0);
  d.A_lp.resize(0, d.m);
  if (max_margin) {
    d.c_lp = Vector::Constant(1, cap);
    d.A_lp = Matrix::Zero(1, d.m);
    d.A_lp(0, m) = 1.0;
  }
  add_box(d, m, bound);
  return d;
}

Assignment to_assignment(const LmiProblem& p, const Vector& y) {
  Assignment a;
  for (const auto& v : p.variables()) {
    a[v.name] = v.from_coordinates(y.segment(p.offset_of(v.name), v.scalar_count()));
  }
  return a;
}

bool converged(detail::IpmResult::Status s) {
  return s == detail::IpmResult::Status::converged ||
         s == detail::IpmResult::Status::converged_relaxed;
}

void fill_stats(SolverStats& st, const detail::IpmResult& r) {
  st.iterations += r.iterations;
  st.duality_gap = r.relative_gap;
  st.primal_infeasibility = r.primal_infeasibility;
  st.dual_infeasibility = r.dual_infeasibility;
}

// Box multipliers relative to the total primal mass: large values mean the box shapes the answer.
bool box_active(const detail::IpmResult& r, Index box_rows, double bound) {
  if (r.x_lp.size() < box_rows) return false;
  const double box_mass = r.x_lp.tail(box_rows).sum() * bound;
  double total = 0.0;
  for (const auto& X : r.X) total += X.trace();
  return box_mass > 1e-6 * (1.0 + total);
}

SdpSolution finish(const LmiProblem& p, SdpSolution sol, const SolverOptions& o) {
  if (!sol.ok()) return sol;
  const VerificationReport rep = verify(p, sol.assignment, o.verify_tolerance);
  if (!rep.satisfied) {
    std::ostringstream os;
    os << "solver point fails verification at " << rep.worst_label << " (slack "
       << rep.worst_slack << ")";
    sol.status = SdpStatus::numerical_failure;
    sol.stats.note = os.str();
  }
  return sol;
}

SdpSolution max_margin_solve(const LmiProblem& p, const std::vector<CompiledBlock>& blocks,
                             const SolverOptions& o, bool verbose, SdpSolution sol) {
  const Index m = p.scalar_count();
  const detail::ConicData d =
      conic_data(blocks, m, Vector::Zero(m), true, o.margin_cap, o.variable_bound);
  detail::IpmOptions io;
  io.tolerance = o.tolerance;
  io.max_iterations = o.max_iterations;
  io.verbose = verbose;
  const detail::IpmResult r = detail::solve_dual_form(d, io);
  fill_stats(sol.stats, r);
  if (!converged(r.status)) {
    // An unfinished run still decides feasibility when one side is exactly feasible: a
    // dual-feasible y with t >= 0 is a point, a primal-feasible X with negative objective bounds
    // the best margin below zero.
    const bool finite = r.y.allFinite();
    const bool point = finite && r.dual_infeasibility <= 1e-10 && r.y(m) >= 0.0;
    const bool bound = r.primal_infeasibility <= 1e-8 && r.primal_objective < 0.0;
    if (!point && !bound) {
      sol.status = SdpStatus::numerical_failure;
      sol.stats.note = std::string("max-margin solve: ") + detail::to_string(r.status);
      return sol;
    }
    if (bound && !point) {
      sol.stats.max_margin = r.primal_objective;
      sol.stats.bound_active = box_active(r, 2 * m, o.variable_bound);
      if (finite) sol.assignment = to_assignment(p, r.y.head(m));
      sol.status = SdpStatus::infeasible;
      std::ostringstream os;
      os << "largest uniform slack is at most " << r.primal_objective << " < 0";
      if (sol.stats.bound_active) os << " (within the variable box " << o.variable_bound << ")";
      sol.stats.note = os.str();
      return sol;
    }
  }
  const double t = r.y(m);
  sol.stats.max_margin = t;
  sol.stats.bound_active = box_active(r, 2 * m, o.variable_bound);
  sol.assignment = to_assignment(p, r.y.head(m));
  if (t >= 0.0) {
    sol.status = SdpStatus::feasible;
  } else {
    sol.status = SdpStatus::infeasible;
    std::ostringstream os;
    os << "largest uniform slack " << t << " < 0";
    if (sol.stats.bound_active) os << " (within the variable box " << o.variable_bound << ")";
    sol.stats.note = os.str();
  }
  return sol;
}

}  // namespace

SdpSolution solve(const LmiProblem& problem, const SolverOptions& options) {
  if (problem.objective()) return minimize(problem, options);
  const bool verbose = options.verbose.value_or(env_verbose());
  const auto blocks = compile(problem);
  SdpSolution sol = max_margin_solve(problem, blocks, options, verbose, SdpSolution{});
  return finish(problem, std::move(sol), options);
}

SdpSolution minimize(const LmiProblem& problem, const SolverOptions& options) {
  if (!problem.objective()) {
    throw PreconditionError("minimize: problem " + problem.name() + " has no objective");
  }
  const bool verbose = options.verbose.value_or(env_verbose());
  const auto blocks = compile(problem);
  const Index m = problem.scalar_count();
  const Vector c = objective_vector(problem);
  const detail::ConicData d = conic_data(blocks, m, c, false, 0.0, options.variable_bound);
  detail::IpmOptions io;
  io.tolerance = options.tolerance;
  io.max_iterations = options.max_iterations;
  io.verbose = verbose;
  const detail::IpmResult r = detail::solve_dual_form(d, io);

  SdpSolution sol;
  fill_stats(sol.stats, r);
  if (converged(r.status)) {
    sol.assignment = to_assignment(problem, r.y);
    sol.objective_value = problem.objective_value(sol.assignment);
    sol.status = SdpStatus::optimal;
    sol.stats.bound_active = box_active(r, 2 * m, options.variable_bound);
    if (sol.stats.bound_active) sol.stats.note = "variable box active at the optimum";
    sol = finish(problem, std::move(sol), options);
    if (sol.ok()) return sol;
  }
  // The direct solve did not produce a verified optimum; classify with the max-margin problem.
  SdpSolution cls = max_margin_solve(problem, blocks, options, verbose, SdpSolution{});
  cls.stats.iterations += sol.stats.iterations;
  if (cls.status == SdpStatus::feasible) {
    cls.status = SdpStatus::numerical_failure;
    cls.stats.note = std::string("feasible, but the minimization ") +
                     (converged(r.status) ? "point failed verification"
                                          : detail::to_string(r.status));
  }
  return cls;
}

VerificationReport verify(const LmiProblem& problem, const Assignment& values, double tol) {
  for (const auto& v : problem.variables()) {
    auto it = values.find(v.name);
    if (it == values.end()) throw std::out_of_range("verify: no value for variable " + v.name);
    if (it->second.rows() != v.rows || it->second.cols() != v.cols) {
      throw DimensionError("verify: value for " + v.name + " is " + shape_string(it->second));
    }
  }
  VerificationReport rep;
  rep.satisfied = true;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (const auto& c : problem.constraints()) {
    Matrix g = c.instantiate(values);
    if (c.sense() == Sense::negative_definite) g = -g;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    ConstraintCheck chk;
    chk.label = c.label();
    chk.min_eigenvalue = es.eigenvalues().minCoeff();
    chk.margin = c.margin();
    chk.slack = chk.min_eigenvalue - chk.margin;
    chk.satisfied = chk.slack >= -tol * std::max(1.0, max_abs(g));
    if (!chk.satisfied) rep.satisfied = false;
    if (chk.slack < rep.worst_slack) {
      rep.worst_slack = chk.slack;
      rep.worst_label = chk.label;
    }
    rep.constraints.push_back(std::move(chk));
  }
  return rep;
}

std::string to_sdpa(const LmiProblem& problem, double variable_bound) {
  const auto blocks = compile(problem);
  const Index m = problem.scalar_count();
  const Vector c = objective_vector(problem);
  std::ostringstream os;
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  os << "\"" << problem.name() << ": " << problem.constraints().size()
     << " LMI blocks and a variable box\n";
  os << m << "\n" << blocks.size() + 1 << "\n";
  for (const auto& b : blocks) os << b.constant.rows() << " ";
  os << -2 * m << "\n";
  for (Index i = 0; i < m; ++i) os << (i ? " " : "") << num(c(i));
  os << "\n";
  // F_0 = −(constant part), F_i = coefficient matrices; upper triangles, 1-based indices.
  auto emit = [&](Index mat, std::size_t blk, const Matrix& f, double sign) {
    for (Index i = 0; i < f.rows(); ++i)
      for (Index j = i; j < f.cols(); ++j)
        if (f(i, j) != 0.0) {
          os << mat << " " << blk + 1 << " " << i + 1 << " " << j + 1 << " " << num(sign * f(i, j))
             << "\n";
        }
  };
  for (std::size_t k = 0; k < blocks.size(); ++k) emit(0, k, blocks[k].constant, -1.0);
  const std::size_t box = blocks.size();
  for (Index i = 0; i < m; ++i) {
    os << 0 << " " << box + 1 << " " << 2 * i + 1 << " " << 2 * i + 1 << " "
       << num(-variable_bound) << "\n";
    os << 0 << " " << box + 1 << " " << 2 * i + 2 << " " << 2 * i + 2 << " "
       << num(-variable_bound) << "\n";
  }
  for (Index v = 0; v < m; ++v) {
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      for (const auto& [i, f] : blocks[k].coef) {
        if (i == v) emit(v + 1, k, f, 1.0);
      }
    }
    os << v + 1 << " " << box + 1 << " " << 2 * v + 1 << " " << 2 * v + 1 << " -1\n";
    os << v + 1 << " " << box + 1 << " " << 2 * v + 2 << " " << 2 * v + 2 << " 1\n";
  }
  return os.str();
}

}  // namespace peakfilter
