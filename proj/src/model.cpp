#include "peakfilter/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <sstream>

namespace peakfilter {

double spectral_abscissa(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("spectral_abscissa: matrix is " + shape_string(m) + ", expected square");
  }
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().real().maxCoeff();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double min_symmetric_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << "(n=" << d.n << ", q=" << d.q << ", r=" << d.r << ", m=" << d.m << ")";
  return os.str();
}

namespace {

void expect_shape(const char* owner, const char* name, const Matrix& m, Index rows, Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << owner << ": block " << name << " is " << m.rows() << "x" << m.cols() << ", expected "
       << rows << "x" << cols;
    throw DimensionError(os.str());
  }
  if (!m.allFinite()) {
    throw PreconditionError(std::string(owner) + ": block " + name + " has non-finite entries");
  }
}

}  // namespace

StochasticLtiSystem::StochasticLtiSystem(Matrix A, Matrix B1, Matrix C1, Matrix C2, Matrix D11,
                                         Matrix D2, Matrix G1, Matrix G2)
    : A_(std::move(A)),
      B1_(std::move(B1)),
      C1_(std::move(C1)),
      C2_(std::move(C2)),
      D11_(std::move(D11)),
      D2_(std::move(D2)),
      G1_(std::move(G1)),
      G2_(std::move(G2)) {
  dims_ = Dims{A_.rows(), B1_.cols(), C2_.rows(), C1_.rows()};
  if (dims_.n == 0 || dims_.q == 0 || dims_.r == 0 || dims_.m == 0) {
    throw DimensionError("StochasticLtiSystem: all dimensions must be positive, got " +
                         to_string(dims_));
  }
  const char* who = "StochasticLtiSystem";
  expect_shape(who, "A", A_, dims_.n, dims_.n);
  expect_shape(who, "B1", B1_, dims_.n, dims_.q);
  expect_shape(who, "C1", C1_, dims_.m, dims_.n);
  expect_shape(who, "C2", C2_, dims_.r, dims_.n);
  expect_shape(who, "D11", D11_, dims_.m, dims_.q);
  expect_shape(who, "D2", D2_, dims_.r, dims_.q);
  expect_shape(who, "G1", G1_, dims_.n, dims_.n);
  expect_shape(who, "G2", G2_, dims_.n, dims_.q);
}

StochasticLtiSystem StochasticLtiSystem::zeros(const Dims& d) {
  return {Matrix::Zero(d.n, d.n), Matrix::Zero(d.n, d.q), Matrix::Zero(d.m, d.n),
          Matrix::Zero(d.r, d.n), Matrix::Zero(d.m, d.q), Matrix::Zero(d.r, d.q),
          Matrix::Zero(d.n, d.n), Matrix::Zero(d.n, d.q)};
}

PolytopicModel::PolytopicModel(std::vector<StochasticLtiSystem> vertices)
    : vertices_(std::move(vertices)) {
  if (vertices_.empty()) throw PreconditionError("PolytopicModel: at least one vertex required");
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    if (!(vertices_[i].dims() == vertices_[0].dims())) {
      throw DimensionError("PolytopicModel: vertex " + std::to_string(i + 1) + " has dims " +
                           to_string(vertices_[i].dims()) + ", vertex 1 has " +
                           to_string(vertices_[0].dims()));
    }
  }
}

DeconvolutionFilter::DeconvolutionFilter(Matrix Af, Matrix Bf, Matrix Cf, Matrix Df)
    : Af_(std::move(Af)), Bf_(std::move(Bf)), Cf_(std::move(Cf)), Df_(std::move(Df)) {
  const char* who = "DeconvolutionFilter";
  const Index k = Af_.rows();
  expect_shape(who, "Af", Af_, k, k);
  expect_shape(who, "Bf", Bf_, k, Bf_.cols());
  expect_shape(who, "Cf", Cf_, Cf_.rows(), k);
  expect_shape(who, "Df", Df_, Cf_.rows(), Bf_.cols());
}

DeconvolutionFilter DeconvolutionFilter::zeros(Index states, Index inputs, Index outputs) {
  return {Matrix::Zero(states, states), Matrix::Zero(states, inputs),
          Matrix::Zero(outputs, states), Matrix::Zero(outputs, inputs)};
}

ErrorWiring error_wiring(const StochasticLtiSystem& sys, const AugmentationMode& mode) {
  if (std::holds_alternative<DeconvolutionMode>(mode)) {
    return {sys.C2(), sys.D2(), sys.C1(), sys.D11(),
            Matrix::Identity(sys.dims().m, sys.dims().m)};
  }
  const auto& f = std::get<FaultOutputMap>(mode);
  const Dims& d = sys.dims();
  const char* who = "build_augmented(fault)";
  expect_shape(who, "C2", f.C2, d.r, d.n);
  expect_shape(who, "D2", f.D2, d.r, d.q);
  expect_shape(who, "C21", f.C21, f.C21.rows(), d.n);
  expect_shape(who, "D21", f.D21, f.C21.rows(), d.q);
  expect_shape(who, "H", f.H, f.H.rows(), d.r);
  return {f.C21, f.D21, f.C2, f.D2, -f.H};
}

AugmentedSystem build_augmented(const StochasticLtiSystem& sys, const DeconvolutionFilter& filt,
                                const AugmentationMode& mode) {
  const ErrorWiring w = error_wiring(sys, mode);
  const Dims& d = sys.dims();
  const Index k = filt.states();
  const char* who = "build_augmented";
  if (filt.inputs() != w.Cin.rows()) {
    throw DimensionError(std::string(who) + ": Bf has " + std::to_string(filt.inputs()) +
                         " columns but the filter input has " + std::to_string(w.Cin.rows()) +
                         " rows");
  }
  if (filt.outputs() != w.Cz.rows()) {
    throw DimensionError(std::string(who) + ": Cf has " + std::to_string(filt.outputs()) +
                         " rows but the estimated signal has " + std::to_string(w.Cz.rows()));
  }

  AugmentedSystem aug;
  aug.A = Matrix::Zero(d.n + k, d.n + k);
  aug.A.topLeftCorner(d.n, d.n) = sys.A();
  aug.A.bottomLeftCorner(k, d.n) = filt.Bf() * w.Cin;
  aug.A.bottomRightCorner(k, k) = filt.Af();

  aug.B = Matrix::Zero(d.n + k, d.q);
  aug.B.topRows(d.n) = sys.B1();
  aug.B.bottomRows(k) = filt.Bf() * w.Din;

  aug.G1 = Matrix::Zero(d.n + k, d.n + k);
  aug.G1.topLeftCorner(d.n, d.n) = sys.G1();

  aug.G2 = Matrix::Zero(d.n + k, d.q);
  aug.G2.topRows(d.n) = sys.G2();

  aug.C = Matrix::Zero(w.W.rows(), d.n + k);
  aug.C.leftCols(d.n) = w.W * (w.Cz - filt.Df() * w.Cin);
  aug.C.rightCols(k) = -w.W * filt.Cf();
  aug.D = w.W * (w.Dz - filt.Df() * w.Din);
  return aug;
}

StochasticLtiSystem combine_vertices(const PolytopicModel& model, std::span<const double> alpha) {
  if (alpha.size() != model.size()) {
    throw DimensionError("combine_vertices: " + std::to_string(alpha.size()) +
                         " weights for " + std::to_string(model.size()) + " vertices");
  }
  double sum = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw PreconditionError("combine_vertices: negative or NaN weight");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw PreconditionError("combine_vertices: weights sum to " + std::to_string(sum) +
                            ", not 1");
  }
  const Dims& d = model.dims();
  Matrix A = Matrix::Zero(d.n, d.n), B1 = Matrix::Zero(d.n, d.q), C1 = Matrix::Zero(d.m, d.n),
         C2 = Matrix::Zero(d.r, d.n), D11 = Matrix::Zero(d.m, d.q), D2 = Matrix::Zero(d.r, d.q),
         G1 = Matrix::Zero(d.n, d.n), G2 = Matrix::Zero(d.n, d.q);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& v = model.vertex(i);
    const double a = alpha[i];
    A += a * v.A();
    B1 += a * v.B1();
    C1 += a * v.C1();
    C2 += a * v.C2();
    D11 += a * v.D11();
    D2 += a * v.D2();
    G1 += a * v.G1();
    G2 += a * v.G2();
  }
  return {A, B1, C1, C2, D11, D2, G1, G2};
}

SpectralVerdict esms_spectral_oracle(const Matrix& A, const Matrix& G1) {
  if (A.rows() != A.cols()) throw DimensionError("esms_spectral_oracle: A is " + shape_string(A));
  if (G1.rows() != A.rows() || G1.cols() != A.cols()) {
    throw DimensionError("esms_spectral_oracle: G1 is " + shape_string(G1) + ", A is " +
                         shape_string(A));
  }
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix generator = kron(I, A) + kron(A, I) + kron(G1, G1);
  const double a = spectral_abscissa(generator);
  return {a < 0.0, a};
}

double lambda_admissible_bound(std::span<const Matrix> a_list) {
  if (a_list.empty()) throw PreconditionError("lambda_admissible_bound: empty list");
  double worst = -std::numeric_limits<double>::infinity();
  for (const Matrix& a : a_list) worst = std::max(worst, spectral_abscissa(a));
  if (!(worst < 0.0)) {
    throw PreconditionError("lambda_admissible_bound: spectral abscissa " +
                            std::to_string(worst) + " >= 0, the λ interval is empty");
  }
  return -2.0 * worst;
}

double default_margin(const Matrix& constant_block) {
  return 1e-7 * (1.0 + max_abs(constant_block));
}

}  // namespace peakfilter
