#pragma once

#include "peakfilter/linalg.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace peakfilter {

/// Dimensions of one plant: state n, disturbance q, measurement r, estimated signal m.
struct Dims {
  Index n = 0;
  Index q = 0;
  Index r = 0;
  Index m = 0;

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Itô plant
///   dx = (A x + B1 w) dt + (G1 x + G2 w) dβ,   y = C2 x + D2 w,   z = C1 x + D11 w
/// with a single scalar Wiener process β.
class StochasticLtiSystem {
 public:
  StochasticLtiSystem(Matrix A, Matrix B1, Matrix C1, Matrix C2, Matrix D11, Matrix D2,
                      Matrix G1, Matrix G2);

  const Matrix& A() const { return A_; }
  const Matrix& B1() const { return B1_; }
  const Matrix& C1() const { return C1_; }
  const Matrix& C2() const { return C2_; }
  const Matrix& D11() const { return D11_; }
  const Matrix& D2() const { return D2_; }
  const Matrix& G1() const { return G1_; }
  const Matrix& G2() const { return G2_; }
  const Dims& dims() const { return dims_; }

  /// Zero plant of the given dimensions.
  static StochasticLtiSystem zeros(const Dims& d);

 private:
  Matrix A_, B1_, C1_, C2_, D11_, D2_, G1_, G2_;
  Dims dims_;
};

/// Convex hull of vertex plants sharing one set of dimensions.
class PolytopicModel {
 public:
  explicit PolytopicModel(std::vector<StochasticLtiSystem> vertices);

  const std::vector<StochasticLtiSystem>& vertices() const { return vertices_; }
  const StochasticLtiSystem& vertex(std::size_t i) const { return vertices_.at(i); }
  std::size_t size() const { return vertices_.size(); }
  const Dims& dims() const { return vertices_.front().dims(); }

 private:
  std::vector<StochasticLtiSystem> vertices_;
};

/// Full-order filter  dx̂ = Af x̂ dt + Bf y dt,  ẑ = Cf x̂ + Df y.
class DeconvolutionFilter {
 public:
  DeconvolutionFilter(Matrix Af, Matrix Bf, Matrix Cf, Matrix Df);

  const Matrix& Af() const { return Af_; }
  const Matrix& Bf() const { return Bf_; }
  const Matrix& Cf() const { return Cf_; }
  const Matrix& Df() const { return Df_; }

  Index states() const { return Af_.rows(); }
  Index inputs() const { return Bf_.cols(); }
  Index outputs() const { return Cf_.rows(); }

  static DeconvolutionFilter zeros(Index states, Index inputs, Index outputs);

 private:
  Matrix Af_, Bf_, Cf_, Df_;
};

/// Output wiring of the fault-reconstruction error  e_f = f − H(y − ŷ).
/// C2/D2 are the full reordered measurement maps, C21/D21 the fault-free rows fed to the filter.
struct FaultOutputMap {
  Matrix H;
  Matrix C2;
  Matrix D2;
  Matrix C21;
  Matrix D21;
};

struct DeconvolutionMode {};

using AugmentationMode = std::variant<DeconvolutionMode, FaultOutputMap>;

/// Error dynamics of plant + filter over ξ = [x; x̂]:
///   dξ = (Ã ξ + B̃ w) dt + (G̃1 ξ + G̃2 w) dβ,   z̃ = C̃ ξ + D̃ w.
struct AugmentedSystem {
  Matrix A;
  Matrix B;
  Matrix G1;
  Matrix G2;
  Matrix C;
  Matrix D;

  Index states() const { return A.rows(); }
  Index disturbances() const { return B.cols(); }
  Index outputs() const { return C.rows(); }
};

/// Common form of both error outputs: e = W [(Cz − Df Cin) x − Cf x̂ + (Dz − Df Din) w].
/// Deconvolution: W = I, Cin = C2, Din = D2, Cz = C1, Dz = D11.
/// Fault reconstruction: W = −H, Cin = C21, Din = D21, Cz = C2, Dz = D2.
struct ErrorWiring {
  Matrix Cin, Din, Cz, Dz, W;
};

ErrorWiring error_wiring(const StochasticLtiSystem& sys, const AugmentationMode& mode);

AugmentedSystem build_augmented(const StochasticLtiSystem& sys, const DeconvolutionFilter& filt,
                                const AugmentationMode& mode = DeconvolutionMode{});

/// Entrywise convex combination Σ α_i Ω_i. Weights must lie on the simplex (tolerance 1e-12).
StochasticLtiSystem combine_vertices(const PolytopicModel& model, std::span<const double> alpha);

struct SpectralVerdict {
  bool stable = false;
  double abscissa = 0.0;
};

/// Mean-square stability from the second-moment generator I⊗A + A⊗I + G1⊗G1.
SpectralVerdict esms_spectral_oracle(const Matrix& A, const Matrix& G1);

struct EsmsCertificate {
  enum class Verdict { stable, not_certified, solver_failure };
  Verdict verdict = Verdict::not_certified;
  std::optional<Matrix> Q;
  /// Largest uniform margin t with Q ≽ t·I and −(AᵀQ + QA + G1ᵀQG1) ≽ t·I (capped).
  double margin = 0.0;
};

/// Lyapunov LMI test for mean-square stability. margin = nullopt uses the default strictness margin.
EsmsCertificate esms_lmi_check(const Matrix& A, const Matrix& G1,
                               std::optional<double> margin = std::nullopt);

/// −2·max over the list of the spectral abscissa; throws if any matrix is not Hurwitz.
double lambda_admissible_bound(std::span<const Matrix> a_list);

/// Default strictness margin for a constant block: 1e-7·(1 + max|entry|).
double default_margin(const Matrix& constant_block);

}  // namespace peakfilter
