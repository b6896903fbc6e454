#include "peakfilter/lmi.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <tuple>

namespace peakfilter {

namespace {

Matrix I(Index k) { return Matrix::Identity(k, k); }

AffineExpr K(const Matrix& m) { return AffineExpr::constant(m); }

void require_positive(const char* who, const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw PreconditionError(std::string(who) + ": " + what + " must be positive and finite, got " +
                            std::to_string(v));
  }
}

AffineExpr gamma_expr(LmiProblem& p, const GammaSpec& g) {
  if (g.is_fixed()) {
    require_positive(p.name().c_str(), "gamma", *g.value);
    return K(Matrix::Constant(1, 1, *g.value));
  }
  AffineExpr e = p.declare_scalar(var::gamma);
  p.minimize_scalar(var::gamma);
  return e;
}

void add_scalar_bounds(LmiProblem& p, const AffineExpr& mu, const AffineExpr& gamma) {
  p.add(LmiConstraint("mu>0", Sense::positive_definite, {1}, {{0, 0, mu}}));
  p.add(LmiConstraint("gamma-mu>0", Sense::positive_definite, {1}, {{0, 0, gamma - mu}}));
}

std::string indexed(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i + 1) + "]";
}

std::string indexed(const std::string& base, std::size_t i, std::size_t j) {
  return base + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
}

// (7) and (8) for one closed loop.
void add_lemma1_pair(LmiProblem& p, const AugmentedSystem& a, const AffineExpr& Q,
                     const AffineExpr& mu, const AffineExpr& gamma, double lambda,
                     const std::string& suffix) {
  const Index N = a.states(), q = a.disturbances(), m = a.outputs();
  p.add(LmiConstraint(
      "lemma1.7" + suffix, Sense::negative_definite, {N, q, N},
      {{0, 0, Q * a.A + a.A.transpose() * Q + lambda * Q},
       {0, 1, Q * a.B},
       {0, 2, a.G1.transpose() * Q},
       {1, 1, AffineExpr::scalar_times(-mu, I(q))},
       {1, 2, a.G2.transpose() * Q},
       {2, 2, -Q}}));
  p.add(LmiConstraint("lemma1.8" + suffix, Sense::positive_definite, {N, q, m},
                      {{0, 0, lambda * Q},
                       {0, 2, K(a.C.transpose())},
                       {1, 1, AffineExpr::scalar_times(gamma - mu, I(q))},
                       {1, 2, K(a.D.transpose())},
                       {2, 2, AffineExpr::scalar_times(gamma, I(m))}}));
}

// The slack forms (9)/(12)/(15) are only O(ε) away from singular: with W = Q the leading
// 2×2 group block is [−Q, Q + O(ε); ·, −Q]. Substituting x1 = √ε·y + x2 and scaling w, x4 by
// √ε, then dividing by ε, gives a congruent matrix (same feasible set) whose slack is O(1).
// Cells [0, first) are x1, [first, 2·first) the matching x2 cells, the rest w and x4.
std::vector<BlockEntry> slack_congruence(const std::vector<BlockEntry>& table, double eps,
                                         int first) {
  const double se = std::sqrt(eps);
  auto expand = [&](int i) -> std::vector<std::pair<double, int>> {
    if (i < first) return {{se, i}, {1.0, i + first}};
    if (i < 2 * first) return {{1.0, i}};
    return {{se, i}};
  };
  std::map<std::pair<int, int>, AffineExpr> out;
  auto add = [&](int r, int c, const AffineExpr& e, double k) {
    if (r > c) return;  // lower cells follow from the upper ones
    auto it = out.find({r, c});
    if (it == out.end()) {
      out.emplace(std::make_pair(r, c), k * e);
    } else {
      it->second += k * e;
    }
  };
  for (const auto& b : table) {
    // full symmetric expansion: M_rc and M_cr
    std::vector<std::tuple<int, int, AffineExpr>> cells;
    if (b.row == b.col) {
      cells.emplace_back(b.row, b.col, 0.5 * (b.expr + b.expr.transpose()));
    } else {
      cells.emplace_back(b.row, b.col, b.expr);
      cells.emplace_back(b.col, b.row, b.expr.transpose());
    }
    for (const auto& [r, c, e] : cells) {
      for (const auto& [a, rr] : expand(r)) {
        for (const auto& [bb, cc] : expand(c)) add(rr, cc, e, a * bb / eps);
      }
    }
  }
  std::vector<BlockEntry> result;
  for (auto& [rc, e] : out) result.push_back({rc.first, rc.second, std::move(e)});
  return result;
}

// Block rows of the Theorem-2/3/4 family.
struct ImprovedVars {
  AffineExpr Tbar, Afbar, Bfbar, Cfbar, Dfbar, mu, gamma;
  std::vector<AffineExpr> Qbar, Rbar, Sbar;
};

std::vector<BlockEntry> theta_table(const ImprovedVars& v, std::size_t i, const ErrorWiring& w,
                                    Index n, Index q, double lambda) {
  const Index p = w.W.rows();
  const AffineExpr& Q = v.Qbar[i];
  return {{0, 0, lambda * Q.block(0, 0, n, n)},
          {0, 1, lambda * Q.block(0, n, n, n)},
          {1, 1, lambda * Q.block(n, n, n, n)},
          {2, 2, AffineExpr::scalar_times(v.gamma - v.mu, I(q))},
          {3, 0, w.W * (w.Cz - v.Dfbar * w.Cin)},
          {3, 1, -w.W * v.Cfbar},
          {3, 2, w.W * (w.Dz - v.Dfbar * w.Din)},
          {3, 3, AffineExpr::scalar_times(v.gamma, I(p))}};
}

// Ξ_ij: slack/Lyapunov variables of vertex i, plant data of vertex j.
std::vector<BlockEntry> xi_table(const ImprovedVars& v, std::size_t i,
                                 const StochasticLtiSystem& plant, const ErrorWiring& w,
                                 double lambda, double eps) {
  const Index n = plant.dims().n, q = plant.dims().q;
  const double c = 1.0 + lambda * eps / 2.0;
  const double se = std::sqrt(eps);
  const AffineExpr& Q = v.Qbar[i];
  const AffineExpr Q1 = Q.block(0, 0, n, n), Q2 = Q.block(0, n, n, n), Q3 = Q.block(n, n, n, n);
  const AffineExpr& R = v.Rbar[i];
  const AffineExpr& S = v.Sbar[i];
  const AffineExpr Rt = R.transpose(), St = S.transpose();
  const Matrix& A = plant.A();
  const Matrix& B1 = plant.B1();

  const AffineExpr L1 = Q1 - R - Rt;
  const AffineExpr L2 = Q2 - v.Tbar - S;
  const AffineExpr L3 = Q3 - v.Tbar - v.Tbar.transpose();
  const AffineExpr L4 = c * Rt + eps * (Rt * A) + eps * (v.Bfbar * w.Cin);
  const AffineExpr L5 = c * v.Tbar + eps * v.Afbar;
  const AffineExpr L6 = c * St + eps * (St * A) + eps * (v.Bfbar * w.Cin);
  const AffineExpr L7 = L5;
  const AffineExpr L8 = se * (Rt * B1) + se * (v.Bfbar * w.Din);
  const AffineExpr L9 = se * (St * B1) + se * (v.Bfbar * w.Din);

  const Matrix G1t = plant.G1().transpose(), G2t = plant.G2().transpose();
  return {{0, 0, L1},
          {0, 1, L2},
          {0, 2, L4},
          {0, 3, L5},
          {0, 4, L8},
          {1, 1, L3},
          {1, 2, L6},
          {1, 3, L7},
          {1, 4, L9},
          {2, 2, -Q1},
          {2, 3, -Q2},
          {2, 5, se * (G1t * R)},
          {2, 6, se * (G1t * S)},
          {3, 3, -Q3},
          {4, 4, AffineExpr::scalar_times(-v.mu, I(q))},
          {4, 5, G2t * R},
          {4, 6, G2t * S},
          {5, 5, L1},
          {5, 6, L2},
          {6, 6, L3}};
}

LmiProblem improved_problem(std::string name, const PolytopicModel& model,
                            const AugmentationMode& mode, GammaSpec gamma, double lambda,
                            double eps, const DeconvolutionFilter* frozen) {
  require_positive(name.c_str(), "lambda", lambda);
  require_positive(name.c_str(), "epsilon", eps);
  const Dims d = model.dims();
  const Index n = d.n, q = d.q;
  const std::size_t s = model.size();
  std::vector<ErrorWiring> wiring;
  for (const auto& v : model.vertices()) wiring.push_back(error_wiring(v, mode));
  const Index fin = wiring[0].Cin.rows();
  const Index fout = wiring[0].Cz.rows();

  LmiProblem p(std::move(name));
  ImprovedVars v;
  v.gamma = gamma_expr(p, gamma);
  v.mu = p.declare_scalar(var::mu);
  for (std::size_t i = 0; i < s; ++i) {
    v.Qbar.push_back(p.declare_symmetric(var::Qbar(i), 2 * n));
    v.Rbar.push_back(p.declare_full(var::Rbar(i), n, n));
    v.Sbar.push_back(p.declare_full(var::Sbar(i), n, n));
  }
  v.Tbar = p.declare_full(var::Tbar, n, n);
  if (frozen) {
    if (frozen->states() != n || frozen->inputs() != fin || frozen->outputs() != fout) {
      throw DimensionError(p.name() + ": filter has (states, inputs, outputs) = (" +
                           std::to_string(frozen->states()) + ", " +
                           std::to_string(frozen->inputs()) + ", " +
                           std::to_string(frozen->outputs()) + "), expected (" +
                           std::to_string(n) + ", " + std::to_string(fin) + ", " +
                           std::to_string(fout) + ")");
    }
    v.Afbar = v.Tbar * frozen->Af();
    v.Bfbar = v.Tbar * frozen->Bf();
    v.Cfbar = K(frozen->Cf());
    v.Dfbar = K(frozen->Df());
  } else {
    v.Afbar = p.declare_full(var::Afbar, n, n);
    v.Bfbar = p.declare_full(var::Bfbar, n, fin);
    v.Cfbar = p.declare_full(var::Cfbar, fout, n);
    v.Dfbar = p.declare_full(var::Dfbar, fout, fin);
  }

  const Index pout = wiring[0].W.rows();
  for (std::size_t i = 0; i < s; ++i) {
    p.add(LmiConstraint(indexed("Qbar>0", i), Sense::positive_definite, {2 * n},
                        {{0, 0, v.Qbar[i]}}));
  }
  for (std::size_t i = 0; i < s; ++i) {
    p.add(LmiConstraint(indexed("Theta", i), Sense::positive_definite, {n, n, q, pout},
                        theta_table(v, i, wiring[i], n, q, lambda)));
  }
  const std::vector<Index> xi_sizes{n, n, n, n, q, n, n};
  for (std::size_t i = 0; i < s; ++i) {
    p.add(LmiConstraint(indexed("Xi", i, i), Sense::negative_definite, xi_sizes,
                        slack_congruence(xi_table(v, i, model.vertex(i), wiring[i], lambda, eps),
                                         eps, 2)));
  }
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = i + 1; j < s; ++j) {
      auto table = xi_table(v, i, model.vertex(j), wiring[j], lambda, eps);
      auto other = xi_table(v, j, model.vertex(i), wiring[i], lambda, eps);
      table.insert(table.end(), std::make_move_iterator(other.begin()),
                   std::make_move_iterator(other.end()));
      p.add(LmiConstraint(indexed("Xi", i, j) + "+" + indexed("Xi", j, i),
                          Sense::negative_definite, xi_sizes, slack_congruence(table, eps, 2)));
    }
  }
  add_scalar_bounds(p, v.mu, v.gamma);
  return p;
}

}  // namespace

LmiProblem proposition1_problem(const Matrix& A, const Matrix& G1, std::optional<double> margin) {
  if (A.rows() != A.cols()) throw DimensionError("proposition1: A is " + shape_string(A));
  if (G1.rows() != A.rows() || G1.cols() != A.cols()) {
    throw DimensionError("proposition1: G1 is " + shape_string(G1) + ", A is " + shape_string(A));
  }
  const Index n = A.rows();
  LmiProblem p("proposition1");
  AffineExpr Q = p.declare_symmetric(var::Q, n);
  p.add(LmiConstraint("Q>0", Sense::positive_definite, {n}, {{0, 0, Q}}, margin));
  p.add(LmiConstraint("lyapunov", Sense::negative_definite, {n},
                      {{0, 0, A.transpose() * Q + Q * A + G1.transpose() * Q * G1}}, margin));
  return p;
}

LmiProblem lemma1_analysis(const AugmentedSystem& aug, GammaSpec gamma, double lambda) {
  return lemma1_analysis(std::span<const AugmentedSystem>(&aug, 1), gamma, lambda);
}

LmiProblem lemma1_analysis(std::span<const AugmentedSystem> loops, GammaSpec gamma,
                           double lambda) {
  if (loops.empty()) throw PreconditionError("lemma1: no closed loops");
  require_positive("lemma1", "lambda", lambda);
  const Index N = loops[0].states();
  for (const auto& a : loops) {
    if (a.states() != N || a.disturbances() != loops[0].disturbances() ||
        a.outputs() != loops[0].outputs()) {
      throw DimensionError("lemma1: closed loops have different dimensions");
    }
  }
  LmiProblem p("lemma1");
  AffineExpr g = gamma_expr(p, gamma);
  AffineExpr mu = p.declare_scalar(var::mu);
  AffineExpr Q = p.declare_symmetric(var::Q, N);
  p.add(LmiConstraint("Q>0", Sense::positive_definite, {N}, {{0, 0, Q}}));
  for (std::size_t i = 0; i < loops.size(); ++i) {
    add_lemma1_pair(p, loops[i], Q, mu, g, lambda,
                    loops.size() == 1 ? std::string() : indexed("", i));
  }
  add_scalar_bounds(p, mu, g);
  return p;
}

LmiProblem lemma2_analysis(const AugmentedSystem& a, GammaSpec gamma, double lambda,
                           double epsilon) {
  require_positive("lemma2", "lambda", lambda);
  require_positive("lemma2", "epsilon", epsilon);
  const Index N = a.states(), q = a.disturbances(), m = a.outputs();
  LmiProblem p("lemma2");
  AffineExpr g = gamma_expr(p, gamma);
  AffineExpr mu = p.declare_scalar(var::mu);
  AffineExpr Q = p.declare_symmetric(var::Q, N);
  AffineExpr W = p.declare_full(var::W, N, N);
  const double se = std::sqrt(epsilon);
  const AffineExpr Wt = W.transpose();
  p.add(LmiConstraint("Q>0", Sense::positive_definite, {N}, {{0, 0, Q}}));
  const double c = 1.0 + lambda * epsilon / 2.0;
  p.add(LmiConstraint("lemma2.9", Sense::negative_definite, {N, N, q, N},
                      slack_congruence({{0, 0, Q - W - Wt},
                                        {0, 1, Wt * (c * I(N) + epsilon * a.A)},
                                        {0, 2, se * (Wt * a.B)},
                                        {1, 1, -Q},
                                        {1, 3, se * (a.G1.transpose() * W)},
                                        {2, 2, AffineExpr::scalar_times(-mu, I(q))},
                                        {2, 3, a.G2.transpose() * W},
                                        {3, 3, Q - W - Wt}},
                                       epsilon, 1)));
  p.add(LmiConstraint("lemma1.8", Sense::positive_definite, {N, q, m},
                      {{0, 0, lambda * Q},
                       {0, 2, K(a.C.transpose())},
                       {1, 1, AffineExpr::scalar_times(g - mu, I(q))},
                       {1, 2, K(a.D.transpose())},
                       {2, 2, AffineExpr::scalar_times(g, I(m))}}));
  add_scalar_bounds(p, mu, g);
  return p;
}

LmiProblem theorem1_synthesis(const StochasticLtiSystem& sys, GammaSpec gamma, double lambda) {
  return corollary1_synthesis(PolytopicModel({sys}), gamma, lambda);
}

LmiProblem corollary1_synthesis(const PolytopicModel& model, GammaSpec gamma, double lambda) {
  require_positive("corollary1", "lambda", lambda);
  const Dims d = model.dims();
  const Index n = d.n, q = d.q, r = d.r, m = d.m;
  LmiProblem p(model.size() == 1 ? "theorem1" : "corollary1");
  AffineExpr g = gamma_expr(p, gamma);
  AffineExpr mu = p.declare_scalar(var::mu);
  AffineExpr R = p.declare_symmetric(var::R, n);
  AffineExpr V = p.declare_symmetric(var::V, n);
  AffineExpr Z = p.declare_full(var::Z, n, r);
  AffineExpr S = p.declare_full(var::S, n, n);
  AffineExpr T = p.declare_full(var::T, m, n);
  AffineExpr Df = p.declare_full(var::Df, m, r);
  p.add(LmiConstraint("R>0", Sense::positive_definite, {n}, {{0, 0, R}}));
  p.add(LmiConstraint("V>0", Sense::positive_definite, {n}, {{0, 0, V}}));

  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& v = model.vertex(i);
    const std::string sfx = model.size() == 1 ? std::string() : indexed("", i);
    const Matrix& A = v.A();
    const Matrix At = A.transpose();
    const Matrix G1t = v.G1().transpose(), G2t = v.G2().transpose();
    p.add(LmiConstraint(
        "Sigma1" + sfx, Sense::negative_definite, {n, n, q, n, n},
        {{0, 0, R * A + At * R + lambda * R},
         {0, 1, At * V + v.C2().transpose() * Z.transpose() + S.transpose()},
         {0, 2, R * v.B1()},
         {0, 3, G1t * R},
         {0, 4, G1t * V},
         {1, 1, -S - S.transpose() + lambda * V},
         {1, 2, V * v.B1() + Z * v.D2()},
         {2, 2, AffineExpr::scalar_times(-mu, I(q))},
         {2, 3, G2t * R},
         {2, 4, G2t * V},
         {3, 3, -R},
         {4, 4, -V}}));
    p.add(LmiConstraint("Sigma2" + sfx, Sense::positive_definite, {n, n, q, m},
                        {{0, 0, lambda * R},
                         {1, 1, lambda * V},
                         {2, 2, AffineExpr::scalar_times(g - mu, I(q))},
                         {3, 0, v.C1() - Df * v.C2() - T},
                         {3, 1, T},
                         {3, 2, v.D11() - Df * v.D2()},
                         {3, 3, AffineExpr::scalar_times(g, I(m))}}));
  }
  add_scalar_bounds(p, mu, g);
  return p;
}

LmiProblem theorem2_synthesis(const StochasticLtiSystem& sys, GammaSpec gamma, double lambda,
                              double epsilon) {
  return improved_problem("theorem2", PolytopicModel({sys}), DeconvolutionMode{}, gamma, lambda,
                          epsilon, nullptr);
}

LmiProblem theorem3_synthesis(const PolytopicModel& model, GammaSpec gamma, double lambda,
                              double epsilon) {
  return improved_problem(model.size() == 1 ? "theorem2" : "theorem3", model,
                          DeconvolutionMode{}, gamma, lambda, epsilon, nullptr);
}

LmiProblem theorem4_fault_synthesis(const StochasticLtiSystem& sys, const FaultOutputMap& map,
                                    GammaSpec gamma, double lambda, double epsilon) {
  return improved_problem("theorem4", PolytopicModel({sys}), map, gamma, lambda, epsilon,
                          nullptr);
}

LmiProblem improved_analysis(const PolytopicModel& model, const DeconvolutionFilter& filter,
                             const AugmentationMode& mode, GammaSpec gamma, double lambda,
                             double epsilon) {
  return improved_problem("improved_analysis", model, mode, gamma, lambda, epsilon, &filter);
}

}  // namespace peakfilter
