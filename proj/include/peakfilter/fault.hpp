#pragma once

#include "peakfilter/model.hpp"
#include "peakfilter/model_io.hpp"
#include "peakfilter/simulate.hpp"
#include "peakfilter/synthesis.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace peakfilter {

/// No row permutation isolates the faulty sensors: the construction assumes that some sensors are
/// not potentially faulty, i.e. r − p rows of F vanish.
class FaultStructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Plant with sensor faults  y = C2 x + D2 ω + F f.
struct FaultModel {
  StochasticLtiSystem base;
  Matrix F;

  FaultModel(StochasticLtiSystem base, Matrix F);
  Index faults() const { return F.cols(); }
};

/// Row permutation bringing F to [0; F2]. Row i of the reordered output is row permutation[i]
/// of the original one. No scaling is applied.
struct OutputPartition {
  std::vector<Index> permutation;
  Index split = 0;  // r − p
  Matrix F2;
  double F2_condition = 1.0;
  Matrix C2, D2;  // reordered
  Matrix C21, C22, D21, D22;

  Matrix apply(const Matrix& rows) const;
  Matrix invert(const Matrix& rows) const;
};

OutputPartition normalize_fault_structure(const Matrix& C2, const Matrix& D2, const Matrix& F);

/// H = [H1  F2⁻¹].
Matrix build_H(const Matrix& H1, const Matrix& F2);

struct FaultEstimator {
  DeconvolutionFilter filter;
  Matrix H;
  OutputPartition partition;

  FaultOutputMap output_map() const;
};

FaultOutputMap fault_output_map(const OutputPartition& part, const Matrix& H);

struct FaultSynthesis {
  OutputPartition partition;
  Matrix H;
  SynthesisOutcome outcome;
  std::optional<FaultEstimator> estimator;
};

/// Improved-method synthesis of the reconstruction filter. γ = nullopt minimizes γ.
FaultSynthesis synthesize_fault_filter(const FaultModel& fm, const Matrix& H1,
                                       std::optional<double> gamma, double lambda,
                                       double epsilon = 1e-3,
                                       const SynthesisOptions& options = {});

/// Forward-Euler realization of  dx̂ = Af x̂ dt + Bf y1 dt,  f̂ = H(y − Cf x̂ − Df y1).
class FaultReconstructor {
 public:
  explicit FaultReconstructor(FaultEstimator est);
  /// y in partition order; returns f̂ for this sample and advances x̂ by dt.
  Vector step(const Vector& y, double dt);
  const Vector& state() const { return xhat_; }

 private:
  FaultEstimator est_;
  Vector xhat_;
};

/// Measurement period for forward Euler: min(1e-3, 0.2/ρ(Af)) rounded down to a multiple of dt.
double recommended_sample_period(const DeconvolutionFilter& filter, double dt);

/// Batch form over the columns of `y` (partition order). The sample period must equal dt.
Matrix reconstruct(const FaultEstimator& est, const Matrix& y, double sample_period, double dt);

/// Linearized inverted pendulum with an angle sensor fault, C1 = 0 and D11 = 0 (unused).
FaultModel pendulum_model(const PendulumParameters& p = {});

/// Piecewise-linear fault signal through (times[k], values.col(k)), held beyond both ends.
struct FaultProfile {
  std::vector<double> times;
  Matrix values;

  Vector at(double t) const;
  static FaultProfile none(Index faults);
  /// 0 until `start`, then slope·(t − start) up to `level`, then held.
  static FaultProfile ramp_and_hold(double start, double slope, double level);
};

struct FaultScenario {
  FaultProfile fault;
  DisturbanceSpec disturbance;
  double dt = 1e-4;
  double sample_period = 1e-3;
  double horizon = 10.0;
  std::uint64_t seed = 1;
};

struct FaultRun {
  std::vector<double> t;
  Matrix f;     // p × samples
  Matrix fhat;  // p × samples
  Matrix y;     // r × samples, partition order
};

/// Euler–Maruyama run of the plant with the fault injected into y, reconstructed online.
FaultRun simulate_fault_scenario(const FaultModel& fm, const FaultEstimator& est,
                                 const FaultScenario& sc);

std::string fault_run_csv(const FaultRun& run, const std::string& header);

}  // namespace peakfilter
