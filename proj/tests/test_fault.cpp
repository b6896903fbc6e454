#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

TEST_CASE("partition of the pendulum fault direction") {
  const auto part = normalize_fault_structure(mat(2, 2, {0, 1, 1, 0}), mat(2, 2, {0, 0.6, 0, 0}),
                                              mat(2, 1, {0, 1}));
  CHECK(part.permutation == std::vector<Index>{0, 1});
  CHECK(part.split == 1);
  CHECK(part.F2 == mat(1, 1, {1}));
  CHECK(part.C21 == mat(1, 2, {0, 1}));
  CHECK(part.C22 == mat(1, 2, {1, 0}));
}

TEST_CASE("partition swaps rows when the fault sits on the first sensor") {
  const Matrix C2 = mat(2, 2, {1, 2, 3, 4});
  const Matrix D2 = mat(2, 1, {5, 6});
  const auto part = normalize_fault_structure(C2, D2, mat(2, 1, {1, 0}));
  CHECK(part.permutation == std::vector<Index>{1, 0});
  CHECK(part.F2 == mat(1, 1, {1}));
  CHECK(part.C21 == mat(1, 2, {3, 4}));
  CHECK(part.D22 == mat(1, 1, {5}));
}

TEST_CASE("partition keeps the fault gain unscaled") {
  const auto part = normalize_fault_structure(Matrix::Identity(2, 2), Matrix::Zero(2, 1),
                                              mat(2, 1, {0, 3}));
  CHECK(part.F2 == mat(1, 1, {3}));
  CHECK(part.F2_condition == doctest::Approx(1.0));
}

TEST_CASE("partition round trip") {
  std::mt19937_64 g(4);
  const Matrix C2 = random_matrix(g, 3, 4);
  const Matrix D2 = random_matrix(g, 3, 2);
  const Matrix F = mat(3, 1, {0.0, 2.0, 0.0});
  const auto part = normalize_fault_structure(C2, D2, F);
  CHECK(part.invert(part.apply(C2)) == C2);
  CHECK(part.invert(part.apply(D2)) == D2);
  const Matrix PF = part.apply(F);
  CHECK(PF.topRows(2).isZero(0));
  CHECK(PF.bottomRows(1) == part.F2);
  CHECK(part.C2 == part.apply(C2));
}

TEST_CASE("inseparable or degenerate fault structures are rejected") {
  const Matrix C2 = Matrix::Identity(2, 2);
  const Matrix D2 = Matrix::Zero(2, 1);
  try {
    normalize_fault_structure(C2, D2, mat(2, 1, {1, 1}));
    FAIL("expected FaultStructureError");
  } catch (const FaultStructureError& e) {
    CHECK(std::string(e.what()).find("not potentially faulty") != std::string::npos);
  }
  CHECK_THROWS_AS(normalize_fault_structure(C2, D2, Matrix::Zero(2, 1)), PreconditionError);
  CHECK_THROWS_AS(normalize_fault_structure(C2, D2, Matrix::Identity(2, 2)), PreconditionError);
  CHECK_THROWS_AS(normalize_fault_structure(C2, D2, Matrix::Zero(2, 0)), PreconditionError);
}

TEST_CASE("build_H") {
  CHECK(build_H(mat(1, 1, {1}), mat(1, 1, {1})) == mat(1, 2, {1, 1}));
  CHECK(build_H(mat(1, 1, {0}), mat(1, 1, {2})) == mat(1, 2, {0, 0.5}));
  CHECK((build_H(mat(1, 2, {0.3, -0.7}), mat(1, 1, {4})) - mat(1, 3, {0.3, -0.7, 0.25}))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK_THROWS_AS(build_H(mat(1, 1, {1}), mat(1, 1, {0})), PreconditionError);

  std::mt19937_64 g(8);
  for (int i = 0; i < 10; ++i) {
    const Matrix F2 = random_matrix(g, 2, 2) + 2.0 * Matrix::Identity(2, 2);
    const Matrix H = build_H(random_matrix(g, 2, 1), F2);
    Matrix F = Matrix::Zero(3, 2);
    F.bottomRows(2) = F2;
    CHECK((H * F - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pendulum model entries") {
  const auto fm = pendulum_model();
  const Matrix& A = fm.base.A();
  CHECK(A(0, 0) == 0.0);
  CHECK(A(0, 1) == doctest::Approx(4.0816).epsilon(1e-4));
  CHECK(A(1, 0) == doctest::Approx(-26.8063).epsilon(1e-4));
  CHECK(A(1, 1) == doctest::Approx(-64.9872).epsilon(1e-4));
  CHECK(fm.F == mat(2, 1, {0, 1}));
  CHECK(fm.base.G2().isZero(0));
  CHECK(fm.base.D2() == mat(2, 2, {0, std::sqrt(0.4), 0, 0}));
  CHECK(fm.base.C2() == mat(2, 2, {0, 1, 1, 0}));
  CHECK(fm.faults() == 1);

  PendulumParameters p;
  p.m = 1.0;
  p.l = 1.0;
  p.kappa = p.zeta = p.g = p.k1 = p.k2 = 0.0;
  CHECK(pendulum_model(p).base.A() == mat(2, 2, {0, 1, 0, 0}));
  p.m = -1.0;
  CHECK_THROWS_AS(pendulum_model(p), PreconditionError);
}

TEST_CASE("fault model dimension rules") {
  const auto base = pendulum_model().base;
  CHECK_THROWS_AS(FaultModel(base, Matrix::Zero(2, 0)), PreconditionError);
  CHECK_THROWS_AS(FaultModel(base, Matrix::Identity(2, 2)), PreconditionError);
  CHECK_THROWS_AS(FaultModel(base, Matrix::Zero(3, 1)), DimensionError);
}

TEST_CASE("reconstruction of a zero stream is zero") {
  const auto fm = pendulum_model();
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  const FaultEstimator est{reference_filter("pendulum_fault"), build_H(mat(1, 1, {1}), part.F2), part};
  const Matrix f = reconstruct(est, Matrix::Zero(2, 500), 1e-3, 1e-3);
  CHECK(f.rows() == 1);
  CHECK(f.cols() == 500);
  CHECK(f.isZero(0));
  CHECK_THROWS_AS(reconstruct(est, Matrix::Zero(2, 10), 1e-3, 1e-4), PreconditionError);
}

TEST_CASE("a fault on the faulty sensor alone passes straight through") {
  // y1 = 0 keeps x̂ = 0, so f̂ = H·[0; F2 f] = f
  const auto fm = pendulum_model();
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  const FaultEstimator est{reference_filter("pendulum_fault"), build_H(mat(1, 1, {1}), part.F2), part};
  Matrix y = Matrix::Zero(2, 50);
  for (Index k = 0; k < 50; ++k) y(1, k) = 0.01 * k;
  const Matrix f = reconstruct(est, y, 1e-3, 1e-3);
  CHECK((f - y.bottomRows(1)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("streaming and batch reconstruction agree") {
  const auto fm = pendulum_model();
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  const FaultEstimator est{reference_filter("pendulum_fault"), build_H(mat(1, 1, {1}), part.F2), part};
  std::mt19937_64 g(1);
  const Matrix y = random_matrix(g, 2, 200);
  const Matrix batch = reconstruct(est, y, 1e-3, 1e-3);
  FaultReconstructor r(est);
  for (Index k = 0; k < y.cols(); ++k) CHECK(r.step(y.col(k), 1e-3)(0) == batch(0, k));
}

TEST_CASE("recommended sample period") {
  const auto f = reference_filter("pendulum_fault");
  const double h = recommended_sample_period(f, 1e-4);
  CHECK(h <= 1e-3);
  CHECK(h >= 1e-4);
  CHECK(std::abs(h / 1e-4 - std::round(h / 1e-4)) < 1e-9);
}

TEST_CASE("fault profiles") {
  const auto ramp = FaultProfile::ramp_and_hold(2.0, 0.1, 0.5);
  CHECK(ramp.at(0.0)(0) == 0.0);
  CHECK(ramp.at(2.0)(0) == 0.0);
  CHECK(ramp.at(4.0)(0) == doctest::Approx(0.2));
  CHECK(ramp.at(7.0)(0) == doctest::Approx(0.5));
  CHECK(ramp.at(100.0)(0) == doctest::Approx(0.5));
  CHECK(FaultProfile::none(2).at(3.0).isZero(0));
}

TEST_CASE("Theorem 4 synthesis on the pendulum") {
  const auto fm = pendulum_model();
  const auto fs = synthesize_fault_filter(fm, mat(1, 1, {1}), 1.0, 2.0);
  REQUIRE(fs.outcome.ok());
  REQUIRE(fs.estimator);
  CHECK(fs.outcome.result->family == "theorem4");
  CHECK(fs.outcome.result->certified);
  CHECK(fs.H == mat(1, 2, {1, 1}));
  CHECK(fs.estimator->filter.inputs() == 1);
  CHECK(fs.estimator->filter.outputs() == 2);
  const double mu = fs.outcome.result->mu;
  CHECK(mu > 0.0);
  CHECK(mu < 1.0);

  // below the computed infimum (about 0.0387)
  const auto low = synthesize_fault_filter(fm, mat(1, 1, {1}), 0.01, 2.0);
  CHECK(low.outcome.kind == SynthesisOutcome::Kind::no_admissible_filter);

  const auto best = synthesize_fault_filter(fm, mat(1, 1, {1}), std::nullopt, 2.0);
  REQUIRE(best.outcome.ok());
  CHECK(best.outcome.result->gamma < 0.1);
  CHECK(best.outcome.result->gamma > 0.01);
}

TEST_CASE("reference reconstruction filter certifies in fault mode") {
  const auto fm = pendulum_model();
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  const auto map = fault_output_map(part, build_H(mat(1, 1, {1}), part.F2));
  const auto c = certify_closed_loop(PolytopicModel({fm.base}), reference_filter("pendulum_fault"), 1.05, 2.0,
                                     Method::quadratic, std::nullopt, map);
  CHECK(c.certified);
}

TEST_CASE("simulated fault scenario tracks a ramp") {
  const auto fm = pendulum_model();
  const auto fs = synthesize_fault_filter(fm, mat(1, 1, {1}), 1.0, 2.0);
  REQUIRE(fs.estimator);
  FaultScenario sc{FaultProfile::ramp_and_hold(2.0, 0.1, 0.5),
                   DisturbanceSpec{FilteredNoise{2, 10.0, 0.2, 3}}};
  sc.sample_period = recommended_sample_period(fs.estimator->filter, sc.dt);
  sc.horizon = 12.0;
  const auto run = simulate_fault_scenario(fm, *fs.estimator, sc);
  REQUIRE(!run.t.empty());
  double err = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < run.t.size(); ++k) {
    if (run.t[k] < 8.0) continue;
    err += std::pow(run.f(0, k) - run.fhat(0, k), 2);
    ++count;
  }
  REQUIRE(count > 0);
  CHECK(err / count <= std::pow(1.0 * 0.2, 2));
  const std::string csv = fault_run_csv(run, "pendulum");
  CHECK(csv.find("f1") != std::string::npos);
}
