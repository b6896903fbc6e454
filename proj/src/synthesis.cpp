#include "peakfilter/synthesis.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace peakfilter {

namespace {

constexpr double kDefaultEpsilon = 1e-3;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_fault(const AugmentationMode& mode) {
  return std::holds_alternative<FaultOutputMap>(mode);
}

std::string family_name(const SynthesisSpec& spec) {
  if (spec.method == Method::quadratic) return "corollary1";
  return is_fault(spec.mode) ? "theorem4" : "theorem3";
}

double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return kInf;
  return s(0) / smin;
}

const Matrix& lookup(const Assignment& a, const std::string& name) {
  auto it = a.find(name);
  if (it == a.end()) throw ExtractionError("solution has no variable " + name);
  return it->second;
}

Matrix checked_inverse(const Matrix& m, const char* what, double limit, double* condition) {
  const double c = condition_number(m);
  if (condition) *condition = c;
  if (!std::isfinite(c) || c > limit) {
    std::ostringstream os;
    os << what << " is numerically singular (condition " << c << " > " << limit
       << "); increase the strictness margin and re-solve";
    throw ExtractionError(os.str());
  }
  return m.partialPivLu().inverse();
}

std::vector<AugmentedSystem> closed_loops(const PolytopicModel& model,
                                          const DeconvolutionFilter& filter,
                                          const AugmentationMode& mode) {
  std::vector<AugmentedSystem> loops;
  for (const auto& v : model.vertices()) loops.push_back(build_augmented(v, filter, mode));
  return loops;
}

// −2·max spectral abscissa over the closed loops; may be ≤ 0 for unstable loops.
double closed_loop_bound(const std::vector<AugmentedSystem>& loops) {
  double worst = -kInf;
  for (const auto& l : loops) worst = std::max(worst, spectral_abscissa(l.A));
  return -2.0 * worst;
}

std::optional<double> plant_bound(const PolytopicModel& model, std::string* why) {
  std::vector<Matrix> as;
  for (const auto& v : model.vertices()) as.push_back(v.A());
  for (std::size_t i = 0; i < as.size(); ++i) {
    const double a = spectral_abscissa(as[i]);
    if (!(a < 0.0)) {
      if (why) {
        std::ostringstream os;
        os << "vertex " << i + 1 << " plant matrix A is not Hurwitz (spectral abscissa " << a
           << "), so no filter can make the error system mean-square stable";
        *why = os.str();
      }
      return std::nullopt;
    }
  }
  return lambda_admissible_bound(as);
}

SynthesisOutcome failure(SynthesisOutcome::Kind kind, std::string reason,
                         std::optional<double> margin = std::nullopt) {
  SynthesisOutcome o;
  o.kind = kind;
  o.reason = std::move(reason);
  o.max_margin = margin;
  return o;
}

DeconvolutionFilter extract(const SynthesisSpec& spec, const Assignment& a, double limit,
                            double* condition) {
  return spec.method == Method::quadratic ? extract_filter_quadratic(a, limit, condition)
                                          : extract_filter_improved(a, limit, condition);
}

SynthesisOutcome finish(const SynthesisSpec& spec, LmiProblem problem, GammaSpec gamma,
                        double lambda, std::optional<double> epsilon,
                        const SynthesisOptions& options) {
  SdpSolution sol = solve(problem, options.solver);
  if (sol.status == SdpStatus::infeasible) {
    return failure(SynthesisOutcome::Kind::no_admissible_filter,
                   "no admissible filter: " + sol.stats.note, sol.stats.max_margin);
  }
  if (!sol.ok()) {
    return failure(SynthesisOutcome::Kind::solver_failure, "solver failure: " + sol.stats.note,
                   sol.stats.max_margin);
  }

  double cond = 0.0;
  std::optional<DeconvolutionFilter> filter;
  try {
    filter = extract(spec, sol.assignment, options.condition_limit, &cond);
  } catch (const ExtractionError&) {
    // one retry with a larger strictness margin
    problem.scale_margins(10.0);
    SdpSolution again = solve(problem, options.solver);
    if (!again.ok()) {
      return failure(SynthesisOutcome::Kind::solver_failure,
                     "extraction failed and the margin-bumped re-solve returned " +
                         std::string(to_string(again.status)) + ": " + again.stats.note);
    }
    try {
      filter = extract(spec, again.assignment, options.condition_limit, &cond);
    } catch (const ExtractionError& e) {
      return failure(SynthesisOutcome::Kind::solver_failure, e.what());
    }
    sol = std::move(again);
  }

  SynthesisResult r;
  r.family = family_name(spec);
  r.method = spec.method;
  r.lambda = lambda;
  r.epsilon = spec.method == Method::improved ? epsilon : std::nullopt;
  r.gamma = gamma.is_fixed() ? *gamma.value : lookup(sol.assignment, var::gamma)(0, 0);
  r.mu = lookup(sol.assignment, var::mu)(0, 0);
  r.filter = *filter;
  r.certificates = sol.assignment;
  r.extraction_condition = cond;
  r.solver = sol.stats;

  const auto loops = closed_loops(spec.model, r.filter, spec.mode);
  r.lambda_bound_closed_loop = closed_loop_bound(loops);
  const VerificationReport rep =
      verify(problem, sol.assignment, options.solver.verify_tolerance);
  std::ostringstream note;
  if (!(lambda < r.lambda_bound_closed_loop)) {
    note << "lambda = " << lambda << " is outside the admissible range (0, "
         << r.lambda_bound_closed_loop << ") of the realized closed loop";
  } else if (!rep.satisfied) {
    note << "verification failed at " << rep.worst_label << " (slack " << rep.worst_slack << ")";
  } else if (!(r.mu > 0.0 && r.mu < r.gamma)) {
    note << "mu = " << r.mu << " is not in (0, gamma)";
  } else {
    r.certified = true;
    note << "lambda range and LMI verification passed";
  }
  r.certification_note = note.str();

  SynthesisOutcome o;
  o.kind = SynthesisOutcome::Kind::success;
  o.result = std::move(r);
  o.max_margin = sol.stats.max_margin;
  return o;
}

std::optional<SynthesisOutcome> reject_lambda(const SynthesisSpec& spec, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("lambda must be positive");
  std::string why;
  const auto bound = plant_bound(spec.model, &why);
  if (!bound) return failure(SynthesisOutcome::Kind::no_admissible_filter, "no admissible filter: " + why);
  if (!(lambda < *bound)) {
    std::ostringstream os;
    os << "no admissible filter: lambda = " << lambda << " is outside the admissible range (0, "
       << *bound << ") set by the plant eigenvalues";
    return failure(SynthesisOutcome::Kind::no_admissible_filter, os.str());
  }
  return std::nullopt;
}

// Lexicographic (γ, λ, ε) comparison over successful, certified outcomes.
bool better(const SynthesisOutcome& a, const SynthesisOutcome& b) {
  const bool ga = a.ok() && a.result->certified;
  const bool gb = b.ok() && b.result->certified;
  if (ga != gb) return ga;
  if (!ga) return false;
  const auto& ra = *a.result;
  const auto& rb = *b.result;
  if (ra.gamma != rb.gamma) return ra.gamma < rb.gamma;
  if (ra.lambda != rb.lambda) return ra.lambda < rb.lambda;
  return ra.epsilon.value_or(0.0) < rb.epsilon.value_or(0.0);
}

double score(const SynthesisOutcome& o) {
  if (o.ok() && o.result->certified) return o.result->gamma;
  if (o.kind == SynthesisOutcome::Kind::no_admissible_filter && o.max_margin) {
    return 1e3 - *o.max_margin;
  }
  return 1e6;
}

}  // namespace

const char* to_string(Method m) { return m == Method::quadratic ? "quadratic" : "improved"; }

Method method_from_string(const std::string& s) {
  if (s == "quadratic") return Method::quadratic;
  if (s == "improved") return Method::improved;
  throw PreconditionError("unknown method \"" + s + "\" (expected quadratic or improved)");
}

const char* to_string(SynthesisOutcome::Kind k) {
  switch (k) {
    case SynthesisOutcome::Kind::success: return "success";
    case SynthesisOutcome::Kind::no_admissible_filter: return "no_admissible_filter";
    case SynthesisOutcome::Kind::solver_failure: return "solver_failure";
  }
  return "?";
}

DeconvolutionFilter extract_filter_quadratic(const Assignment& s, double limit, double* condition) {
  const Matrix& V = lookup(s, var::V);
  const Matrix Vinv = checked_inverse(V, "V", limit, condition);
  return DeconvolutionFilter(-Vinv * lookup(s, var::S), -Vinv * lookup(s, var::Z),
                             lookup(s, var::T), lookup(s, var::Df));
}

DeconvolutionFilter extract_filter_improved(const Assignment& s, double limit, double* condition) {
  const Matrix Tinv = checked_inverse(lookup(s, var::Tbar), "Tbar", limit, condition);
  return DeconvolutionFilter(Tinv * lookup(s, var::Afbar), Tinv * lookup(s, var::Bfbar),
                             lookup(s, var::Cfbar), lookup(s, var::Dfbar));
}

LmiProblem synthesis_problem(const SynthesisSpec& spec, GammaSpec gamma, double lambda,
                             std::optional<double> epsilon) {
  if (spec.method == Method::quadratic) {
    if (is_fault(spec.mode)) {
      throw PreconditionError("fault reconstruction synthesis is available with the improved method only");
    }
    return corollary1_synthesis(spec.model, gamma, lambda);
  }
  const double eps = epsilon.value_or(kDefaultEpsilon);
  if (const auto* map = std::get_if<FaultOutputMap>(&spec.mode)) {
    if (spec.model.size() != 1) {
      throw PreconditionError("fault reconstruction synthesis needs a single-vertex model");
    }
    return theorem4_fault_synthesis(spec.model.vertex(0), *map, gamma, lambda, eps);
  }
  return theorem3_synthesis(spec.model, gamma, lambda, eps);
}

SynthesisOutcome minimize_gamma(const SynthesisSpec& spec, double lambda,
                                std::optional<double> epsilon, const SynthesisOptions& options) {
  if (spec.method == Method::improved && !epsilon) epsilon = kDefaultEpsilon;
  if (auto r = reject_lambda(spec, lambda)) return *r;
  return finish(spec, synthesis_problem(spec, GammaSpec::minimized(), lambda, epsilon),
                GammaSpec::minimized(), lambda, epsilon, options);
}

SynthesisOutcome synthesize_at_gamma(const SynthesisSpec& spec, double gamma, double lambda,
                                     std::optional<double> epsilon,
                                     const SynthesisOptions& options) {
  if (spec.method == Method::improved && !epsilon) epsilon = kDefaultEpsilon;
  if (auto r = reject_lambda(spec, lambda)) return *r;
  const GammaSpec g = GammaSpec::fixed(gamma);
  return finish(spec, synthesis_problem(spec, g, lambda, epsilon), g, lambda, epsilon, options);
}

LineSearchResult line_search_lambda(const SynthesisSpec& spec, std::optional<double> epsilon,
                                    const LineSearchSpec& grid, const SynthesisOptions& options) {
  if (grid.coarse_points < 2 || grid.refine_points < 0) {
    throw PreconditionError("line search needs at least 2 coarse points");
  }
  if (!(grid.lower_fraction > 0.0 && grid.lower_fraction < grid.upper_fraction &&
        grid.upper_fraction < 1.0)) {
    throw PreconditionError("line search fractions must satisfy 0 < lower < upper < 1");
  }
  std::string why;
  const auto bound = plant_bound(spec.model, &why);
  if (!bound) throw PreconditionError("empty admissible lambda interval: " + why);

  LineSearchResult out;
  out.bound = *bound;
  out.best = failure(SynthesisOutcome::Kind::no_admissible_filter,
                     "no admissible filter at any grid point");
  double best_score = kInf;
  std::vector<double> coarse(grid.coarse_points);
  const double lo = std::log(grid.lower_fraction * *bound);
  const double hi = std::log(grid.upper_fraction * *bound);
  for (int k = 0; k < grid.coarse_points; ++k) {
    coarse[k] = std::exp(lo + (hi - lo) * k / (grid.coarse_points - 1));
  }

  auto evaluate = [&](double lambda) {
    SynthesisOutcome o = minimize_gamma(spec, lambda, epsilon, options);
    const bool good = o.ok() && o.result->certified;
    out.evaluations.emplace_back(lambda, good ? o.result->gamma : kInf);
    const double s = score(o);
    if (better(o, out.best) || (!out.best.ok() && s < best_score)) out.best = o;
    best_score = std::min(best_score, s);
  };

  for (double l : coarse) evaluate(l);
  if (!out.best.ok() || grid.refine_points == 0) return out;

  const double best_lambda = out.best.result->lambda;
  const auto it = std::find(coarse.begin(), coarse.end(), best_lambda);
  const std::size_t k = static_cast<std::size_t>(it - coarse.begin());
  const double left = k > 0 ? coarse[k - 1] : grid.lower_fraction * *bound;
  const double right = k + 1 < coarse.size() ? coarse[k + 1] : grid.upper_fraction * *bound;
  for (int i = 1; i <= grid.refine_points; ++i) {
    const double l = left + (right - left) * i / (grid.refine_points + 1);
    if (l != best_lambda) evaluate(l);
  }
  return out;
}

namespace {

struct TuneContext {
  const SynthesisSpec* spec;
  const SynthesisOptions* options;
  double lambda_lo, lambda_hi, log_eps_lo, log_eps_hi;
  SynthesisOutcome best;
  double best_score = kInf;
  double best_lambda = 0.0;
  double best_eps = 0.0;
  int evaluations = 0;

  // sin transform keeps every simplex vertex inside the box
  double lambda_of(double u) const {
    return lambda_lo + (lambda_hi - lambda_lo) * 0.5 * (std::sin(u) + 1.0);
  }
  double eps_of(double v) const {
    return std::exp(log_eps_lo + (log_eps_hi - log_eps_lo) * 0.5 * (std::sin(v) + 1.0));
  }
  static double inverse(double x, double lo, double hi) {
    const double s = std::clamp(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0);
    return std::asin(s);
  }

  double evaluate(double lambda, double eps) {
    ++evaluations;
    SynthesisOutcome o = minimize_gamma(*spec, lambda, eps, *options);
    const double s = score(o);
    if (s < best_score || (s == best_score && better(o, best))) {
      best_score = s;
      best = o;
      best_lambda = lambda;
      best_eps = eps;
    }
    return s;
  }
};

double tune_objective(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<TuneContext*>(params);
  return ctx->evaluate(ctx->lambda_of(gsl_vector_get(x, 0)), ctx->eps_of(gsl_vector_get(x, 1)));
}

}  // namespace

TuningResult tune_parameters(const SynthesisSpec& spec, const TuningBounds& bounds,
                             const SynthesisOptions& options) {
  std::string why;
  const auto plant = plant_bound(spec.model, &why);
  if (!plant) {
    TuningResult r;
    r.outcome = failure(SynthesisOutcome::Kind::no_admissible_filter, "no admissible filter: " + why);
    return r;
  }
  const double lambda_hi = std::min(bounds.lambda_max.value_or(*plant), *plant) * 0.995;
  const double lambda_lo = 1e-3 * *plant;
  if (!(bounds.epsilon_min > 0.0 && bounds.epsilon_min <= bounds.epsilon_max)) {
    throw PreconditionError("epsilon bounds must satisfy 0 < min <= max");
  }

  if (spec.method == Method::quadratic) {
    // ε plays no role; the search degenerates to the λ line search
    LineSearchResult ls = line_search_lambda(spec, std::nullopt, {}, options);
    TuningResult r;
    r.outcome = ls.best;
    r.evaluations = static_cast<int>(ls.evaluations.size());
    if (r.outcome.ok()) {
      r.lambda = r.outcome.result->lambda;
      r.start_gamma = r.outcome.result->gamma;
    }
    return r;
  }

  TuneContext ctx{&spec, &options, lambda_lo, lambda_hi, std::log(bounds.epsilon_min),
                  std::log(bounds.epsilon_max), {}, kInf, 0.0, 0.0, 0};
  ctx.best = failure(SynthesisOutcome::Kind::no_admissible_filter,
                     "no admissible filter in the tuning box");

  double l0, e0;
  if (bounds.lambda_start) {
    l0 = std::clamp(*bounds.lambda_start, lambda_lo, lambda_hi);
    e0 = std::clamp(bounds.epsilon_start.value_or(kDefaultEpsilon), bounds.epsilon_min,
                    bounds.epsilon_max);
  } else {
    e0 = std::clamp(bounds.epsilon_start.value_or(kDefaultEpsilon), bounds.epsilon_min,
                    bounds.epsilon_max);
    LineSearchResult ls = line_search_lambda(spec, e0, {}, options);
    ctx.evaluations += static_cast<int>(ls.evaluations.size());
    l0 = ls.best.ok() ? std::clamp(ls.best.result->lambda, lambda_lo, lambda_hi)
                      : 0.5 * (lambda_lo + lambda_hi);
  }
  double start_score = ctx.evaluate(l0, e0);
  if (!(start_score < 1e3)) {
    // infeasible start: the margin surface is nearly flat there, so look along λ first,
    // one decade of ε at a time (upward first, the small-ε end is the badly scaled one)
    std::vector<double> grid{e0};
    for (double e = 10.0 * e0; e <= bounds.epsilon_max * (1.0 + 1e-9); e *= 10.0) grid.push_back(e);
    if (grid.back() < bounds.epsilon_max) grid.push_back(bounds.epsilon_max);
    for (double e = 0.1 * e0; e >= bounds.epsilon_min * (1.0 - 1e-9); e *= 0.1) grid.push_back(e);
    for (double e : grid) {
      LineSearchResult ls = line_search_lambda(spec, e, {}, options);
      ctx.evaluations += static_cast<int>(ls.evaluations.size());
      const double sc = score(ls.best);
      if (ls.best.ok() && sc < ctx.best_score) {
        ctx.best_score = sc;
        ctx.best = ls.best;
        ctx.best_lambda = ls.best.result->lambda;
        ctx.best_eps = e;
      }
      if (ctx.best_score < 1e3) break;
    }
    if (ctx.best_score < 1e3) {
      l0 = std::clamp(ctx.best_lambda, lambda_lo, lambda_hi);
      e0 = ctx.best_eps;
    }
  }

  TuningResult out;
  out.start_gamma = start_score;

  gsl_set_error_handler_off();
  gsl_multimin_function fn{&tune_objective, 2, &ctx};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, TuneContext::inverse(l0, lambda_lo, lambda_hi));
  gsl_vector_set(x, 1, TuneContext::inverse(std::log(e0), ctx.log_eps_lo, ctx.log_eps_hi));
  // keep the start off the ±π/2 flat spots of the transform
  for (int i = 0; i < 2; ++i) {
    gsl_vector_set(x, i, std::clamp(gsl_vector_get(x, i), -1.4, 1.4));
  }
  gsl_vector_set_all(step, 0.3);
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int it = 0; it < bounds.max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-4) == GSL_SUCCESS) break;
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);

  out.outcome = ctx.best;
  out.lambda = ctx.best_lambda;
  out.epsilon = ctx.best_eps;
  out.evaluations = ctx.evaluations;
  if (!out.outcome.ok()) {
    std::ostringstream os;
    os << "no admissible filter in the tuning box (best infeasibility score " << ctx.best_score
       << ")";
    out.outcome.reason = os.str();
  }
  return out;
}

ClosedLoopCertificate certify_closed_loop(const PolytopicModel& model,
                                          const DeconvolutionFilter& filter, double gamma,
                                          double lambda, Method method,
                                          std::optional<double> epsilon,
                                          const AugmentationMode& mode,
                                          const SolverOptions& solver) {
  if (!(gamma > 0.0)) throw PreconditionError("gamma must be positive");
  if (!(lambda > 0.0)) throw PreconditionError("lambda must be positive");
  ClosedLoopCertificate c;
  const auto loops = closed_loops(model, filter, mode);
  c.lambda_bound = closed_loop_bound(loops);
  if (!(lambda < c.lambda_bound)) {
    std::ostringstream os;
    if (c.lambda_bound <= 0.0) {
      os << "closed loop is not Hurwitz (max spectral abscissa " << -0.5 * c.lambda_bound << ")";
    } else {
      os << "lambda = " << lambda << " is outside the admissible range (0, " << c.lambda_bound
         << ") of the closed loop";
    }
    c.reason = os.str();
    c.status = SdpStatus::infeasible;
    return c;
  }

  const LmiProblem problem =
      method == Method::quadratic
          ? lemma1_analysis(std::span<const AugmentedSystem>(loops), GammaSpec::fixed(gamma), lambda)
          : improved_analysis(model, filter, mode, GammaSpec::fixed(gamma), lambda,
                              epsilon.value_or(kDefaultEpsilon));
  const SdpSolution sol = solve(problem, solver);
  c.status = sol.status;
  c.max_margin = sol.stats.max_margin;
  if (!sol.ok()) {
    c.reason = std::string(to_string(sol.status)) + ": " + sol.stats.note;
    if (!sol.assignment.empty()) c.report = verify(problem, sol.assignment, solver.verify_tolerance);
    return c;
  }
  c.report = verify(problem, sol.assignment, solver.verify_tolerance);
  c.mu = sol.assignment.at(var::mu)(0, 0);
  c.certified = c.report.satisfied;
  c.reason = c.certified ? "analysis LMIs feasible" : "verification failed at " + c.report.worst_label;
  return c;
}

}  // namespace peakfilter
