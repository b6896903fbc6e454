// Acceptance runner: `peakfilter_acceptance N` checks criterion N, no argument checks all.
// One line per criterion: "criterion N PASS: detail" or "criterion N FAIL: detail".

#include "helpers.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>

using namespace testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SynthesisSpec example_spec(Method m) { return SynthesisSpec{example1(), m, DeconvolutionMode{}}; }

FaultOutputMap pendulum_map(const FaultModel& fm) {
  const auto part = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  return fault_output_map(part, build_H(mat(1, 1, {1.0}), part.F2));
}

// ---------------------------------------------------------------- 1, 2

Verdict reproduction(Method m, double lambda, std::optional<double> eps, double glo, double ghi,
                     double mlo, double mhi, double limit) {
  const auto t0 = Clock::now();
  const auto o = minimize_gamma(example_spec(m), lambda, eps);
  const double secs = seconds_since(t0);
  if (!o.ok()) return {false, "synthesis failed: " + o.reason};
  const auto& r = *o.result;
  const bool pass = r.gamma >= glo && r.gamma <= ghi && r.mu >= mlo && r.mu <= mhi && secs < limit &&
                    r.certified;
  std::ostringstream os;
  os << "gamma " << fmt("%.4f", r.gamma) << " in [" << glo << ", " << ghi << "], mu "
     << fmt("%.4f", r.mu) << " in [" << mlo << ", " << mhi << "], " << fmt("%.2f", secs)
     << " s (limit " << limit << " s), certified " << (r.certified ? "yes" : "no");
  return {pass, os.str()};
}

Verdict criterion1() {
  return reproduction(Method::quadratic, 2.5, std::nullopt, 0.706, 0.750, 0.37, 0.45, 30.0);
}

Verdict criterion2() {
  return reproduction(Method::improved, 2.7, 1e-3, 0.672, 0.714, 0.34, 0.42, 60.0);
}

// ---------------------------------------------------------------- 3

// Second vertex perturbs A, B1, C2 and D2 of an ESMS base plant; both vertices and the
// midpoint must be mean-square stable.
PolytopicModel random_polytope(std::mt19937_64& g) {
  for (;;) {
    const auto v0 = random_esms_plant(g, 2, 1, 1, 1);
    const Matrix A1 = v0.A() + random_matrix(g, 2, 2, 0.5);
    if (!esms_spectral_oracle(A1, v0.G1()).stable) continue;
    if (!esms_spectral_oracle(0.5 * (v0.A() + A1), v0.G1()).stable) continue;
    const Matrix B1 = v0.B1() + random_matrix(g, 2, 1, 0.3);
    const Matrix C2 = v0.C2() + random_matrix(g, 1, 2, 0.3);
    const Matrix D2 = v0.D2() + random_matrix(g, 1, 1, 0.3);
    const StochasticLtiSystem v1(A1, B1, v0.C1(), C2, v0.D11(), D2, v0.G1(), v0.G2());
    return PolytopicModel({v0, v1});
  }
}

double tuned_gamma(const PolytopicModel& model, Method m) {
  const auto t = tune_parameters(SynthesisSpec{model, m, DeconvolutionMode{}});
  return t.outcome.ok() && t.outcome.result->certified ? t.outcome.result->gamma
                                                       : std::numeric_limits<double>::infinity();
}

Verdict criterion3() {
  const auto t0 = Clock::now();
  const double gq = tuned_gamma(example1(), Method::quadratic);
  const double gi = tuned_gamma(example1(), Method::improved);
  const bool strict = gi < gq;

  std::mt19937_64 g(20240);
  int holds = 0, tried = 0, skipped = 0;
  std::ostringstream misses;
  while (tried < 20) {
    const auto model = random_polytope(g);
    const double q = tuned_gamma(model, Method::quadratic);
    const double i = tuned_gamma(model, Method::improved);
    if (!std::isfinite(q) && !std::isfinite(i)) {
      ++skipped;  // neither family certifies a filter, nothing to order
      continue;
    }
    ++tried;
    if (i <= q * (1.0 + 1e-6)) {
      ++holds;
    } else {
      misses << " (" << fmt("%.4g", i) << " vs " << fmt("%.4g", q) << ")";
    }
  }
  std::ostringstream os;
  os << "Example 1 improved " << fmt("%.4f", gi) << " < quadratic " << fmt("%.4f", gq) << " "
     << (strict ? "yes" : "no") << "; random polytopes " << holds << "/20 ordered";
  if (skipped) os << " (" << skipped << " draws with no certified filter redrawn)";
  if (holds < 20) os << ", misses improved vs quadratic:" << misses.str();
  os << ", " << fmt("%.1f", seconds_since(t0)) << " s";
  return {strict && holds >= 18, os.str()};
}

// ---------------------------------------------------------------- 4

Verdict criterion4() {
  const auto fm = pendulum_model();
  const auto t0 = Clock::now();
  const auto fs = synthesize_fault_filter(fm, mat(1, 1, {1.0}), 1.0, 2.0, 1e-3);
  const double secs = seconds_since(t0);
  if (!fs.outcome.ok()) return {false, "Theorem-4 synthesis failed: " + fs.outcome.reason};
  const double mu = fs.outcome.result->mu;

  // μ is not optimized, so report the feasible interval at γ = 1 as well (bisection on
  // feasibility; direct min/max of μ pushes the filter variables into the box)
  auto feasible_with = [&](double bound, bool upper) {
    LmiProblem p = theorem4_fault_synthesis(fm.base, pendulum_map(fm), GammaSpec::fixed(1.0), 2.0, 1e-3);
    const AffineExpr m = AffineExpr::variable(p.variable(var::mu));
    const Matrix c = Matrix::Constant(1, 1, bound);
    p.add(upper ? LmiConstraint("mu<=c", Sense::negative_definite, {1}, {{0, 0, m - c}})
                : LmiConstraint("mu>=c", Sense::positive_definite, {1}, {{0, 0, m - c}}));
    return solve(p).ok();
  };
  auto edge = [&](bool upper) {
    // upper: smallest c with a point at μ <= c; lower: largest c with a point at μ >= c
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 14; ++k) {
      const double mid = 0.5 * (lo + hi);
      const bool ok = feasible_with(mid, upper);
      if (upper == ok) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double mu_min = edge(true);
  const double mu_max = edge(false);

  const bool pass = mu >= 0.80 && mu <= 0.89 && secs < 30.0 && fs.outcome.result->certified;
  std::ostringstream os;
  os << "feasible and certified, mu " << fmt("%.4f", mu) << " (window [0.80, 0.89]), "
     << fmt("%.2f", secs) << " s; feasible mu interval at gamma = 1 is ["
     << fmt("%.4f", mu_min) << ", " << fmt("%.4f", mu_max) << "]";
  if (!pass) os << "; mu is a free variable of the LMI, the reported value depends on which feasible point the solver returns";
  return {pass, os.str()};
}

// ---------------------------------------------------------------- 5

Verdict criterion5() {
  const auto model = example1();
  const auto fm = pendulum_model();
  struct Case {
    std::string name;
    PolytopicModel model;
    std::string filter;
    double gamma, lambda;
    Method method;
    std::optional<double> eps;
    AugmentationMode mode;
  };
  const std::vector<Case> cases{
      {"ex1_quadratic", model, "ex1_quadratic", 0.7278 * 1.05, 2.5, Method::quadratic, std::nullopt, DeconvolutionMode{}},
      {"ex1_improved", model, "ex1_improved", 0.6932 * 1.05, 2.7, Method::improved, 1e-3, DeconvolutionMode{}},
      {"pendulum_fault", PolytopicModel({fm.base}), "pendulum_fault", 1.0 * 1.05, 2.0, Method::improved, 1e-3,
       pendulum_map(fm)},
  };
  bool pass = true;
  std::ostringstream os;
  for (const auto& c : cases) {
    const auto t0 = Clock::now();
    const auto cert = certify_closed_loop(c.model, reference_filter(c.filter), c.gamma, c.lambda, c.method,
                                          c.eps, c.mode);
    const double secs = seconds_since(t0);
    const bool ok = cert.certified && secs < 30.0;
    pass = pass && ok;
    os << c.name << " (" << to_string(c.method) << ", gamma " << fmt("%.4f", c.gamma) << ") "
       << (ok ? "certified" : "NOT certified: " + cert.reason) << " in " << fmt("%.2f", secs)
       << " s; ";
  }
  return {pass, os.str()};
}

// ---------------------------------------------------------------- 6

AugmentedSystem random_loop(std::mt19937_64& g) {
  const auto p = random_esms_plant(g, 2, 1, 1, 1);
  return AugmentedSystem{p.A(), p.B1(), p.G1(), p.G2(), p.C1(), p.D11()};
}

double largest_margin(const LmiProblem& p) {
  double m = 0.0;
  for (const auto& c : p.constraints()) m = std::max(m, c.margin());
  return m;
}

Verdict criterion6() {
  std::mt19937_64 g(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0, compared = 0, excluded = 0, feasible = 0;
  std::ostringstream bad;
  for (int i = 0; i < 50; ++i) {
    const auto loop = random_loop(g);
    const double lambda = (0.2 + 0.6 * u(g)) * -2.0 * spectral_abscissa(loop.A);
    const auto best = minimize(lemma1_analysis(loop, GammaSpec::minimized(), lambda));
    double gamma = 1.0;
    if (best.ok()) {
      const double gs = best.assignment.at(var::gamma)(0, 0);
      // alternate between clearly infeasible and clearly feasible levels
      gamma = gs * (i % 2 == 0 ? 0.7 + 0.2 * u(g) : 1.1 + 0.3 * u(g));
    }
    const auto p1 = lemma1_analysis(loop, GammaSpec::fixed(gamma), lambda);
    const auto s1 = solve(p1);
    const auto s2 = solve(lemma2_analysis(loop, GammaSpec::fixed(gamma), lambda, 1e-6));
    const double t = s1.stats.max_margin.value_or(0.0);
    if (std::abs(t) < 10.0 * largest_margin(p1) || s1.status == SdpStatus::numerical_failure ||
        s2.status == SdpStatus::numerical_failure) {
      ++excluded;
      continue;
    }
    ++compared;
    feasible += s1.ok();
    if (s1.ok() == s2.ok()) {
      ++agree;
    } else {
      bad << " #" << i << "(lemma1 " << to_string(s1.status) << ", lemma2 " << to_string(s2.status) << ")";
    }
  }
  std::ostringstream os;
  os << agree << "/" << compared << " agree (" << feasible << " feasible, " << excluded
     << " excluded near the boundary or unresolved)";
  if (agree != compared) os << ", disagreements:" << bad.str();
  return {agree == compared && compared >= 40, os.str()};
}

// ---------------------------------------------------------------- 7

Verdict criterion7() {
  std::mt19937_64 g(707);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> target(-1.0, 1.0);
  int agree = 0, compared = 0, excluded = 0, stable = 0;
  std::ostringstream bad;
  for (int i = 0; i < 200; ++i) {
    const Index n = dim(g);
    Matrix A = random_matrix(g, n, n);
    const Matrix G1 = random_matrix(g, n, n, 0.5);
    const double a0 = esms_spectral_oracle(A, G1).abscissa;
    A += 0.5 * (target(g) - a0) * Matrix::Identity(n, n);
    const auto oracle = esms_spectral_oracle(A, G1);
    if (std::abs(oracle.abscissa) <= 1e-6) {
      ++excluded;
      continue;
    }
    const auto lmi = esms_lmi_check(A, G1);
    ++compared;
    stable += oracle.stable;
    const bool lmi_stable = lmi.verdict == EsmsCertificate::Verdict::stable;
    if (lmi_stable == oracle.stable) {
      ++agree;
    } else {
      bad << " #" << i << "(n " << n << ", abscissa " << fmt("%.3g", oracle.abscissa) << ")";
    }
  }
  std::ostringstream os;
  os << agree << "/" << compared << " agree (" << stable << " stable, " << excluded << " excluded)";
  if (agree != compared) os << ", disagreements:" << bad.str();
  return {agree == compared, os.str()};
}

// ---------------------------------------------------------------- 8

struct Triple {
  std::string name;
  std::vector<AugmentedSystem> loops;  // one per vertex
  double gamma;
};

std::vector<DisturbanceSpec> disturbance_suite(Index q) {
  std::vector<DisturbanceSpec> out;
  const double a = 1.0 / std::sqrt(static_cast<double>(q));
  for (int k = 0; k < 10; ++k) {
    Sinusoid s;
    for (Index c = 0; c < q; ++c) {
      s.amplitude.push_back(a);
      s.frequency.push_back(0.02 * std::pow(2.0, k));
      s.phase.push_back(1.3 * static_cast<double>(c));
    }
    out.push_back(DisturbanceSpec{s});
  }
  for (int k = 0; k < 10; ++k) {
    out.push_back(DisturbanceSpec{FilteredNoise{q, 0.3 * std::pow(10.0, k / 4.5), 1.0,
                                                static_cast<std::uint64_t>(100 + k)}});
  }
  for (int k = 0; k < 10; ++k) {
    Matrix levels(q, 4);
    for (Index c = 0; c < q; ++c) {
      levels.row(c) << a, -a, 0.5 * a, -0.25 * a;
      if (c % 2) levels.row(c) *= -1.0;
    }
    out.push_back(DisturbanceSpec{PiecewiseConstant{levels, 0.1 * std::pow(2.0, k / 1.5)}});
  }
  return out;
}

Verdict criterion8() {
  const auto t0 = Clock::now();
  std::vector<Triple> triples;
  const auto model = example1();
  auto vertex_loops = [&](const DeconvolutionFilter& f, const AugmentationMode& mode,
                          const PolytopicModel& m) {
    std::vector<AugmentedSystem> v;
    for (const auto& s : m.vertices()) v.push_back(build_augmented(s, f, mode));
    return v;
  };
  auto certified_gamma = [&](const std::string& name, const PolytopicModel& m,
                             const DeconvolutionFilter& f, double gamma, double lambda, Method meth,
                             std::optional<double> eps, const AugmentationMode& mode) {
    if (certify_closed_loop(m, f, gamma, lambda, meth, eps, mode).certified) {
      triples.push_back({name, vertex_loops(f, mode, m), gamma});
    }
  };
  certified_gamma("ex1_quadratic", model, reference_filter("ex1_quadratic"), 0.7278 * 1.05, 2.5, Method::quadratic,
                  std::nullopt, DeconvolutionMode{});
  certified_gamma("ex1_improved", model, reference_filter("ex1_improved"), 0.6932 * 1.05, 2.7, Method::improved, 1e-3,
                  DeconvolutionMode{});
  for (Method m : {Method::quadratic, Method::improved}) {
    const auto o = minimize_gamma(example_spec(m), m == Method::quadratic ? 2.5 : 2.7);
    if (o.ok() && o.result->certified) {
      triples.push_back({std::string("synth-") + to_string(m),
                         vertex_loops(o.result->filter, DeconvolutionMode{}, model), o.result->gamma});
    }
  }
  const auto fm = pendulum_model();
  const PolytopicModel pend({fm.base});
  certified_gamma("pendulum_fault", pend, reference_filter("pendulum_fault"), 1.05, 2.0, Method::improved, 1e-3,
                  pendulum_map(fm));
  const auto fs = synthesize_fault_filter(fm, mat(1, 1, {1.0}), 1.0, 2.0, 1e-3);
  if (fs.estimator && fs.outcome.result->certified) {
    triples.push_back({"synth-theorem4", vertex_loops(fs.estimator->filter, fs.estimator->output_map(), pend),
                       fs.outcome.result->gamma});
  }

  int runs = 0, violations = 0;
  double worst = -1e9;
  std::string worst_case;
  for (const auto& tr : triples) {
    for (std::size_t v = 0; v < tr.loops.size(); ++v) {
      const auto& loop = tr.loops[v];
      const auto suite = disturbance_suite(loop.disturbances());
      for (std::size_t k = 0; k < suite.size(); ++k) {
        EstimateOptions o;
        o.trials = 100;
        o.dt = 1e-4;
        o.horizon = std::min(default_horizon(loop.A), 10.0);
        o.seed = 1000 + static_cast<std::uint64_t>(k);
        const auto est = peak_to_peak_estimate(loop, suite[k], o);
        ++runs;
        const double excess = est.ratio - 2.0 * est.standard_error - tr.gamma;
        if (excess > worst) {
          worst = excess;
          worst_case = tr.name + " vertex " + std::to_string(v + 1) + " " + suite[k].describe() +
                       " ratio " + fmt("%.4f", est.ratio) + " gamma " + fmt("%.4f", tr.gamma);
        }
        violations += excess > 0.0;
      }
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << triples.size() << " certified triples, " << runs << " estimates, " << violations
     << " violations, closest: " << worst_case << ", " << fmt("%.0f", secs) << " s (limit 600 s)";
  return {triples.size() == 6 && violations == 0 && secs < 600.0, os.str()};
}

// ---------------------------------------------------------------- 9

// Filter realized as T̄⁻¹ form against the implicit descriptor form C̄f(sT̄ − Āf)⁻¹B̄f + D̄f.
double descriptor_mismatch(const Assignment& a, const DeconvolutionFilter& f) {
  using C = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  const Matrix& T = a.at(var::Tbar);
  const Matrix& Ab = a.at(var::Afbar);
  const Matrix& Bb = a.at(var::Bfbar);
  const Matrix& Cb = a.at(var::Cfbar);
  const Matrix& Db = a.at(var::Dfbar);
  const Index n = T.rows();
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const C s(0.0, std::pow(10.0, -2.0 + 4.0 * k / 19.0));
    const CMatrix I = CMatrix::Identity(n, n);
    const CMatrix g1 = f.Cf().cast<C>() *
                           (s * I - f.Af().cast<C>()).partialPivLu().solve(f.Bf().cast<C>()) +
                       f.Df().cast<C>();
    const CMatrix g2 =
        Cb.cast<C>() * (s * T.cast<C>() - Ab.cast<C>()).partialPivLu().solve(Bb.cast<C>()) +
        Db.cast<C>();
    worst = std::max(worst, (g1 - g2).norm() / std::max(1e-300, g2.norm()));
  }
  return worst;
}

Verdict criterion9() {
  std::mt19937_64 g(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int quad_ok = 0, quad_n = 0, imp_ok = 0, imp_n = 0;
  double worst_fr = 0.0;
  std::ostringstream bad;
  int redrawn = 0;
  for (int i = 0; i < 20; ++i) {
    const bool improved = i % 2 == 1;
    const auto plant = random_esms_plant(g, 2, 1, 1, 1);
    const double lambda = (0.2 + 0.5 * u(g)) * -2.0 * spectral_abscissa(plant.A());
    const double eps = 1e-3;
    LmiProblem pmin = improved ? theorem2_synthesis(plant, GammaSpec::minimized(), lambda, eps)
                               : theorem1_synthesis(plant, GammaSpec::minimized(), lambda);
    const auto best = minimize(pmin);
    if (best.status == SdpStatus::infeasible) {
      ++redrawn;  // λ beyond what the plant admits, not a feasible plant
      --i;
      continue;
    }
    if (!best.ok()) {
      bad << " #" << i << " minimization " << to_string(best.status);
      (improved ? imp_n : quad_n)++;
      continue;
    }
    const double gamma = 1.05 * best.assignment.at(var::gamma)(0, 0);
    const auto sol = solve(improved ? theorem2_synthesis(plant, GammaSpec::fixed(gamma), lambda, eps)
                                    : theorem1_synthesis(plant, GammaSpec::fixed(gamma), lambda));
    (improved ? imp_n : quad_n)++;
    if (!sol.ok()) {
      bad << " #" << i << " feasibility " << to_string(sol.status);
      continue;
    }
    DeconvolutionFilter f = DeconvolutionFilter::zeros(2, 1, 1);
    try {
      f = improved ? extract_filter_improved(sol.assignment) : extract_filter_quadratic(sol.assignment);
    } catch (const ExtractionError& e) {
      bad << " #" << i << " extraction: " << e.what();
      continue;
    }
    const auto aug = build_augmented(plant, f);
    const auto check = solve(improved ? lemma2_analysis(aug, GammaSpec::fixed(gamma), lambda, eps)
                                      : lemma1_analysis(aug, GammaSpec::fixed(gamma), lambda));
    if (improved) {
      const double fr = descriptor_mismatch(sol.assignment, f);
      worst_fr = std::max(worst_fr, fr);
      if (check.ok() && fr <= 1e-8) {
        ++imp_ok;
      } else {
        bad << " #" << i << " lemma2 " << to_string(check.status) << " fr " << fmt("%.2g", fr);
      }
    } else if (check.ok()) {
      ++quad_ok;
    } else {
      bad << " #" << i << " lemma1 " << to_string(check.status);
    }
  }
  std::ostringstream os;
  os << "Theorem 1 -> Lemma 1: " << quad_ok << "/" << quad_n << ", Theorem 2 -> Lemma 2: " << imp_ok
     << "/" << imp_n << ", worst frequency-response mismatch " << fmt("%.2e", worst_fr);
  if (redrawn) os << " (" << redrawn << " infeasible draws redrawn)";
  if (!bad.str().empty()) os << ", failures:" << bad.str();
  return {quad_ok == quad_n && imp_ok == imp_n && quad_n + imp_n == 20, os.str()};
}

// ---------------------------------------------------------------- 10

Verdict criterion10() {
  const auto fm = pendulum_model();
  const auto fs = synthesize_fault_filter(fm, mat(1, 1, {1.0}), 1.0, 2.0, 1e-3);
  if (!fs.estimator || !fs.outcome.result->certified) {
    return {false, "no certified Theorem-4 estimator: " + fs.outcome.reason};
  }
  const double gamma = fs.outcome.result->gamma;
  const double start = 2.0, slope = 0.1, level = 0.5, horizon = 14.0, settle = 9.0;

  double err_sum = 0.0, peak_w = 0.0, plateau_fault = 0.0, plateau_free = 0.0;
  std::size_t err_count = 0;
  const int runs = 100;
  for (int i = 0; i < runs; ++i) {
    const auto seed = sub_seed(2025, static_cast<std::uint64_t>(i));
    const DisturbanceSpec w{FilteredNoise{fm.base.dims().q, 10.0, 1.0, seed}};
    peak_w = std::max(peak_w, w.peak_bound());
    for (bool faulty : {true, false}) {
      FaultScenario sc{faulty ? FaultProfile::ramp_and_hold(start, slope, level) : FaultProfile::none(1), w};
      sc.dt = 1e-4;
      sc.sample_period = recommended_sample_period(fs.estimator->filter, sc.dt);
      sc.horizon = horizon;
      sc.seed = seed;
      const auto run = simulate_fault_scenario(fm, *fs.estimator, sc);
      double plateau = 0.0;
      std::size_t pc = 0;
      for (std::size_t k = 0; k < run.t.size(); ++k) {
        if (run.t[k] >= 0.75 * horizon) {
          plateau += std::abs(run.fhat(0, k));
          ++pc;
        }
        if (faulty && run.t[k] >= settle) {
          err_sum += std::pow(run.f(0, k) - run.fhat(0, k), 2);
          ++err_count;
        }
      }
      (faulty ? plateau_fault : plateau_free) += plateau / static_cast<double>(pc);
    }
  }
  plateau_fault /= runs;
  plateau_free /= runs;
  const double mse = err_sum / static_cast<double>(err_count);
  const double bound = std::pow(gamma * peak_w, 2);
  const bool pass = mse <= bound && plateau_free < 0.2 * plateau_fault;
  std::ostringstream os;
  os << runs << " seeded runs, post-transient mean |f - fhat|^2 " << fmt("%.3e", mse)
     << " <= (gamma ||w||)^2 = " << fmt("%.3e", bound) << "; plateaus fault-free "
     << fmt("%.4f", plateau_free) << " vs faulty " << fmt("%.4f", plateau_fault) << " (ratio "
     << fmt("%.3f", plateau_free / plateau_fault) << ", limit 0.2)";
  return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> all{criterion1, criterion2, criterion3, criterion4,
                                                  criterion5, criterion6, criterion7, criterion8,
                                                  criterion9, criterion10};
  std::vector<int> which;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) {
      const int n = std::atoi(argv[i]);
      if (n < 1 || n > 10) {
        std::fprintf(stderr, "usage: %s [criterion 1..10 ...]\n", argv[0]);
        return 1;
      }
      which.push_back(n);
    }
  } else {
    for (int n = 1; n <= 10; ++n) which.push_back(n);
  }
  int failures = 0;
  for (int n : which) {
    Verdict v;
    try {
      v = all[n - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d %s: %s\n", n, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
