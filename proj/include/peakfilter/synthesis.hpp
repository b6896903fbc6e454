#pragma once

#include "peakfilter/lmi.hpp"
#include "peakfilter/model.hpp"
#include "peakfilter/sdp.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace peakfilter {

/// quadratic: common Lyapunov matrix (Corollary 1 / Theorem 1).
/// improved: vertex-dependent slack formulation (Theorem 3 / Theorem 2, Theorem 4 in fault mode).
enum class Method { quadratic, improved };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

/// Raised when filter matrices cannot be recovered from a solver assignment.
class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthesisSpec {
  PolytopicModel model;
  Method method = Method::improved;
  AugmentationMode mode = DeconvolutionMode{};
};

struct SynthesisOptions {
  SolverOptions solver;
  double condition_limit = 1e12;
};

struct SynthesisResult {
  std::string family;
  Method method = Method::improved;
  double gamma = 0.0;
  double mu = 0.0;
  double lambda = 0.0;
  std::optional<double> epsilon;
  DeconvolutionFilter filter = DeconvolutionFilter::zeros(1, 1, 1);
  Assignment certificates;
  /// Condition number of the inverted matrix (V or T̄).
  double extraction_condition = 0.0;
  /// −2·max spectral abscissa of the realized closed loops.
  double lambda_bound_closed_loop = 0.0;
  bool certified = false;
  std::string certification_note;
  SolverStats solver;
};

struct SynthesisOutcome {
  enum class Kind { success, no_admissible_filter, solver_failure };
  Kind kind = Kind::solver_failure;
  std::optional<SynthesisResult> result;
  std::string reason;
  /// Largest uniform slack of the max-margin problem when one was solved.
  std::optional<double> max_margin;

  bool ok() const { return kind == Kind::success; }
};

const char* to_string(SynthesisOutcome::Kind k);

/// Af = −V⁻¹S, Bf = −V⁻¹Z, Cf = T, Df.
DeconvolutionFilter extract_filter_quadratic(const Assignment& solution,
                                             double condition_limit = 1e12,
                                             double* condition = nullptr);

/// [Af Bf; Cf Df] = blockdiag(T̄⁻¹, I)·[Āf B̄f; C̄f D̄f].
DeconvolutionFilter extract_filter_improved(const Assignment& solution,
                                            double condition_limit = 1e12,
                                            double* condition = nullptr);

/// Builds the synthesis LMI for the spec with γ fixed or minimized.
LmiProblem synthesis_problem(const SynthesisSpec& spec, GammaSpec gamma, double lambda,
                             std::optional<double> epsilon);

/// Single SDP minimizing γ at fixed (λ, ε), followed by extraction and post-hoc checks.
SynthesisOutcome minimize_gamma(const SynthesisSpec& spec, double lambda,
                                std::optional<double> epsilon = std::nullopt,
                                const SynthesisOptions& options = {});

/// Feasibility at a given γ (max-margin point), followed by extraction and post-hoc checks.
SynthesisOutcome synthesize_at_gamma(const SynthesisSpec& spec, double gamma, double lambda,
                                     std::optional<double> epsilon = std::nullopt,
                                     const SynthesisOptions& options = {});

struct LineSearchSpec {
  int coarse_points = 20;
  int refine_points = 10;
  /// Coarse grid spans [lower_fraction, upper_fraction]·bound on a log scale.
  double lower_fraction = 1e-3;
  double upper_fraction = 0.995;
};

struct LineSearchResult {
  SynthesisOutcome best;
  std::vector<std::pair<double, double>> evaluations;  // (λ, γ or +inf)
  double bound = 0.0;
};

LineSearchResult line_search_lambda(const SynthesisSpec& spec,
                                    std::optional<double> epsilon = std::nullopt,
                                    const LineSearchSpec& grid = {},
                                    const SynthesisOptions& options = {});

struct TuningBounds {
  std::optional<double> lambda_max;  // defaults to the admissible bound
  double epsilon_min = 1e-6;
  double epsilon_max = 1e-1;
  int max_iterations = 60;
  /// Starting point; defaults to the line-search optimum at ε = 1e−3.
  std::optional<double> lambda_start;
  std::optional<double> epsilon_start;
};

struct TuningResult {
  double lambda = 0.0;
  std::optional<double> epsilon;
  SynthesisOutcome outcome;
  int evaluations = 0;
  double start_gamma = 0.0;
};

TuningResult tune_parameters(const SynthesisSpec& spec, const TuningBounds& bounds = {},
                             const SynthesisOptions& options = {});

struct ClosedLoopCertificate {
  bool certified = false;
  std::string reason;
  SdpStatus status = SdpStatus::numerical_failure;
  double lambda_bound = 0.0;
  std::optional<double> mu;
  std::optional<double> max_margin;
  VerificationReport report;
};

/// Analysis of a fixed filter at fixed γ: common-Q Lemma 1 over all vertices (quadratic) or the
/// vertex-dependent system with frozen filter variables (improved).
ClosedLoopCertificate certify_closed_loop(const PolytopicModel& model,
                                          const DeconvolutionFilter& filter, double gamma,
                                          double lambda, Method method,
                                          std::optional<double> epsilon = std::nullopt,
                                          const AugmentationMode& mode = DeconvolutionMode{},
                                          const SolverOptions& solver = {});

/// Structured report (JSON) with full-precision numbers.
nlohmann::json report_json(const SynthesisResult& r);
nlohmann::json report_json(const SynthesisOutcome& o);
std::string human_summary(const SynthesisResult& r);

}  // namespace peakfilter
