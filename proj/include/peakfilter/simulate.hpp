#pragma once

#include "peakfilter/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace peakfilter {

/// Raised when a path leaves the ball ‖ξ‖ ≤ 1e9.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, std::size_t path, std::size_t step, double time)
      : std::runtime_error(what), path(path), step(step), time(time) {}
  std::size_t path;
  std::size_t step;
  double time;
};

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of path i under root seed r: splitmix64(r + (i+1)·0x9E3779B97F4A7C15).
std::uint64_t sub_seed(std::uint64_t root, std::uint64_t index);

/// ω_c(t) = a_c·sin(2π f_c t + φ_c) per channel.
struct Sinusoid {
  std::vector<double> amplitude;
  std::vector<double> frequency;  // Hz
  std::vector<double> phase;
};

/// Unit-variance Ornstein–Uhlenbeck noise per channel, scaled by peak_clamp and then saturated
/// in norm at peak_clamp. Deterministic given `seed` and the sampling step.
struct FilteredNoise {
  Index channels = 1;
  double bandwidth = 1.0;  // rad/s
  double peak_clamp = 1.0;
  std::uint64_t seed = 1;
};

/// Cycles through `levels` (columns), holding each for `dwell` seconds.
struct PiecewiseConstant {
  Matrix levels;
  double dwell = 1.0;
};

struct DisturbanceSpec {
  std::variant<Sinusoid, FilteredNoise, PiecewiseConstant> kind;

  Index channels() const;
  /// Samples ω(k·dt), k = 0..steps, as a channels×(steps+1) matrix.
  Matrix samples(double dt, std::size_t steps) const;
  /// Analytic bound on sup ‖ω(t)‖ (exact for one channel and for the clamp/levels families).
  double peak_bound() const;
  std::string describe() const;

  static DisturbanceSpec zero(Index channels);
};

struct Trajectory {
  std::vector<double> t;
  Matrix xi;  // states × samples
  Matrix z;   // outputs × samples
  Matrix w;   // disturbances × samples
  std::uint64_t seed = 0;
  double dt = 0.0;
};

struct SimulationOptions {
  double dt = 1e-4;
  /// Defaults to 20/|spectral abscissa of Ã|.
  std::optional<double> horizon;
  std::uint64_t seed = 1;
  /// Keep every k-th sample in the returned trajectory.
  std::size_t record_stride = 1;
  std::optional<Vector> initial_state;
};

/// Default horizon 20/|α(Ã)|; throws PreconditionError for a non-Hurwitz Ã.
double default_horizon(const Matrix& A);

/// ξ_{k+1} = ξ_k + (Ãξ_k + B̃ω_k)dt + (G̃1ξ_k + G̃2ω_k)ΔB_k with one shared ΔB_k ~ N(0, dt).
Trajectory euler_maruyama(const AugmentedSystem& aug, const DisturbanceSpec& w,
                          const SimulationOptions& options = {});

struct EstimateOptions {
  std::size_t trials = 100;
  double dt = 1e-4;
  std::optional<double> horizon;
  std::uint64_t seed = 1;
  std::size_t bootstrap = 200;
  /// Cap on grid points kept for the ensemble statistics (uniform decimation).
  std::size_t max_record = 4000;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

struct PeakEstimate {
  /// ‖z̃‖∞/‖ω‖∞; NaN when ‖ω‖∞ = 0.
  double ratio = 0.0;
  double standard_error = 0.0;
  double output_peak = 0.0;
  double input_peak = 0.0;
  double time_of_peak = 0.0;
  std::size_t trials = 0;
  std::size_t steps = 0;
  bool defined() const { return input_peak > 0.0; }
};

/// sup_t √(E‖z̃(t)‖²) over seeds divided by sup_t ‖ω(t)‖ on the same grid, bootstrap SE over paths.
PeakEstimate peak_to_peak_estimate(const AugmentedSystem& aug, const DisturbanceSpec& w,
                                   const EstimateOptions& options = {});

struct DecayVerdict {
  bool stable = false;
  double slope = 0.0;
  double r_squared = 0.0;
};

struct EsmsEmpiricalOptions {
  std::size_t trials = 200;
  double horizon = 5.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
};

/// Least-squares fit of log E‖x(t)‖² from random unit initial states with ω ≡ 0.
DecayVerdict esms_empirical(const Matrix& A, const Matrix& G1,
                            const EsmsEmpiricalOptions& options = {});

/// FNV-1a over the 17-digit text of the filter matrices.
std::string filter_hash(const DeconvolutionFilter& f);

/// CSV with '#' comment lines (model, filter hash, seed, dt) then a header row.
std::string trajectory_csv(const Trajectory& traj, const std::string& model_name,
                           const std::string& filter_digest);

}  // namespace peakfilter
