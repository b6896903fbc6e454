#include "helpers.hpp"

#include <doctest.h>

using namespace testing;

namespace {

double scalar(const SdpSolution& s, const char* name) { return s.assignment.at(name)(0, 0); }

}  // namespace

TEST_CASE("scalar toy problem: minimize g subject to g > 3") {
  LmiProblem p("toy");
  const AffineExpr g = p.declare_scalar("g");
  p.add(LmiConstraint("g>3", Sense::positive_definite, {1}, {{0, 0, g - Matrix::Constant(1, 1, 3.0)}}));
  p.minimize_scalar("g");
  const auto s = minimize(p);
  REQUIRE(s.status == SdpStatus::optimal);
  CHECK(scalar(s, "g") == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(scalar(s, "g") > 3.0);

  LmiProblem empty("none");
  empty.declare_scalar("g");
  CHECK_THROWS_AS(minimize(empty), PreconditionError);
}

TEST_CASE("contradictory constraints are infeasible") {
  LmiProblem p("contra");
  const AffineExpr x = p.declare_scalar("x");
  p.add(LmiConstraint("x>1", Sense::positive_definite, {1}, {{0, 0, x - Matrix::Constant(1, 1, 1.0)}}));
  p.add(LmiConstraint("x<0", Sense::negative_definite, {1}, {{0, 0, x}}));
  const auto s = solve(p);
  CHECK(s.status == SdpStatus::infeasible);
  REQUIRE(s.stats.max_margin);
  CHECK(*s.stats.max_margin < 0.0);
}

TEST_CASE("mean-square Lyapunov problem") {
  const auto c = example1_center();
  const auto s = solve(proposition1_problem(c.A(), 0.5 * Matrix::Identity(2, 2)));
  REQUIRE(s.status == SdpStatus::feasible);
  const Matrix& Q = s.assignment.at(var::Q);
  const Matrix L = c.A().transpose() * Q + Q * c.A() + 0.25 * Q;
  CHECK(min_symmetric_eigenvalue(Q) > 0.0);
  CHECK(min_symmetric_eigenvalue(-L) > 0.0);

  CHECK(solve(proposition1_problem(Matrix::Identity(2, 2), Matrix::Zero(2, 2))).status ==
        SdpStatus::infeasible);
  // Hurwitz but destabilized by multiplicative noise: −1 + 1.5²/2 > 0
  CHECK(solve(proposition1_problem(-Matrix::Identity(1, 1), 1.5 * Matrix::Identity(1, 1))).status ==
        SdpStatus::infeasible);
}

TEST_CASE("verify reports slack") {
  LmiProblem p("slack");
  const AffineExpr X = p.declare_symmetric("X", 2);
  p.add(LmiConstraint("X>0", Sense::positive_definite, {2}, {{0, 0, X}}, 0.0));
  auto rep = verify(p, {{"X", Matrix::Identity(2, 2)}});
  REQUIRE(rep.constraints.size() == 1);
  CHECK(rep.constraints[0].slack == doctest::Approx(1.0));
  CHECK(rep.satisfied);
  rep = verify(p, {{"X", mat(2, 2, {1, 2, 2, 1})}});
  CHECK_FALSE(rep.satisfied);
  CHECK(rep.worst_slack == doctest::Approx(-1.0));
  CHECK(rep.worst_label == "X>0");
}

TEST_CASE("verify catches a corrupted certificate") {
  const auto s = solve(lemma1_analysis(center_loop("ex1_quadratic"), GammaSpec::fixed(0.8), 2.5));
  REQUIRE(s.ok());
  CHECK(verify(lemma1_analysis(center_loop("ex1_quadratic"), GammaSpec::fixed(0.8), 2.5), s.assignment).satisfied);
  Assignment bad = s.assignment;
  bad[var::Q] = -bad[var::Q];
  CHECK_FALSE(verify(lemma1_analysis(center_loop("ex1_quadratic"), GammaSpec::fixed(0.8), 2.5), bad).satisfied);
  bad = s.assignment;
  bad[var::mu](0, 0) = 0.9;  // μ > γ
  CHECK_FALSE(verify(lemma1_analysis(center_loop("ex1_quadratic"), GammaSpec::fixed(0.8), 2.5), bad).satisfied);
}

TEST_CASE("scaling robustness of the Lyapunov test") {
  const Matrix A = mat(2, 2, {-0.1, 3.0, -3.0, -4.0});
  for (double k : {1e-2, 1e-1, 1.0, 10.0, 100.0}) {
    INFO("scale " << k);
    CHECK(solve(proposition1_problem(k * A, Matrix::Zero(2, 2))).status == SdpStatus::feasible);
    CHECK(solve(proposition1_problem(-k * A, Matrix::Zero(2, 2))).status == SdpStatus::infeasible);
  }
}

TEST_CASE("lemma 1 on the center loop") {
  const auto loop = center_loop("ex1_improved");
  CHECK(solve(lemma1_analysis(loop, GammaSpec::fixed(0.75), 2.5)).ok());
  CHECK(solve(lemma1_analysis(loop, GammaSpec::fixed(0.05), 2.5)).status == SdpStatus::infeasible);

  const auto m = minimize(lemma1_analysis(loop, GammaSpec::minimized(), 2.5));
  REQUIRE(m.status == SdpStatus::optimal);
  const double gstar = scalar(m, var::gamma);
  CHECK(gstar < 0.75);
  CHECK(solve(lemma1_analysis(loop, GammaSpec::fixed(gstar + 1e-6), 2.5)).ok());
  CHECK(solve(lemma1_analysis(loop, GammaSpec::fixed(gstar * 0.98), 2.5)).status ==
        SdpStatus::infeasible);
}

TEST_CASE("theorem 1 and corollary 1") {
  const auto c = example1_center();
  CHECK(solve(theorem1_synthesis(c, GammaSpec::fixed(0.75), 2.5)).ok());

  std::mt19937_64 g(23);
  const auto sys = random_esms_plant(g);
  CHECK(solve(theorem1_synthesis(sys, GammaSpec::fixed(10.0), 0.1)).ok());

  const StochasticLtiSystem unstable(Matrix::Identity(2, 2) * 0.2, c.B1(), c.C1(), c.C2(), c.D11(),
                                     c.D2(), Matrix::Zero(2, 2), c.G2());
  CHECK(solve(theorem1_synthesis(unstable, GammaSpec::fixed(100.0), 0.1)).status ==
        SdpStatus::infeasible);

  const auto model = example1();
  // 0.7278 is the rounded minimum; the computed infimum is 0.727824
  const auto at = solve(corollary1_synthesis(model, GammaSpec::fixed(0.7278 * (1 + 1e-4)), 2.5));
  CHECK(at.ok());
  if (at.ok()) CHECK(scalar(at, var::mu) == doctest::Approx(0.4113).epsilon(0.1));
  CHECK(solve(corollary1_synthesis(model, GammaSpec::fixed(0.60), 2.5)).status ==
        SdpStatus::infeasible);
}

TEST_CASE("theorem 2 and theorem 3") {
  const auto c = example1_center();
  CHECK(solve(theorem2_synthesis(c, GammaSpec::fixed(0.70), 2.7, 1e-3)).ok());
  const auto zero = StochasticLtiSystem::zeros({2, 1, 1, 1});
  // zero plant needs a stable A for the λ-weighted Lyapunov blocks; D11 = 0 so any γ works
  const StochasticLtiSystem calm(-Matrix::Identity(2, 2), zero.B1(), zero.C1(), zero.C2(),
                                 zero.D11(), zero.D2(), zero.G1(), zero.G2());
  CHECK(solve(theorem2_synthesis(calm, GammaSpec::fixed(0.1), 1.0, 1e-3)).ok());

  const auto model = example1();
  const auto at = solve(theorem3_synthesis(model, GammaSpec::fixed(0.6932), 2.7, 1e-3));
  CHECK(at.ok());
  CHECK(solve(theorem3_synthesis(model, GammaSpec::fixed(0.60), 2.7, 1e-3)).status ==
        SdpStatus::infeasible);
}

TEST_CASE("sdpa export") {
  LmiProblem p("toy");
  const AffineExpr g = p.declare_scalar("g");
  p.add(LmiConstraint("g>3", Sense::positive_definite, {1}, {{0, 0, g - Matrix::Constant(1, 1, 3.0)}}));
  p.minimize_scalar("g");
  const std::string text = to_sdpa(p);
  CHECK(text.find("1") != std::string::npos);
  CHECK(text == to_sdpa(p));
}
