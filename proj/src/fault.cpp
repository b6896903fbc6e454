#include "peakfilter/fault.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace peakfilter {

namespace {

Index column_rank(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-12);
  return qr.rank();
}

}  // namespace

FaultModel::FaultModel(StochasticLtiSystem b, Matrix f) : base(std::move(b)), F(std::move(f)) {
  const Dims& d = base.dims();
  if (F.rows() != d.r) {
    throw DimensionError("fault direction F has " + std::to_string(F.rows()) +
                         " rows, the plant has " + std::to_string(d.r) + " outputs");
  }
  const Index p = F.cols();
  if (!(p >= 1 && p < d.r && d.r <= d.n)) {
    throw PreconditionError("fault model needs n >= r > p >= 1 (n = " + std::to_string(d.n) +
                            ", r = " + std::to_string(d.r) + ", p = " + std::to_string(p) + ")");
  }
  if (column_rank(F) != p) throw PreconditionError("fault direction F must have full column rank");
}

Matrix OutputPartition::apply(const Matrix& rows) const {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    out.row(static_cast<Index>(i)) = rows.row(permutation[i]);
  }
  return out;
}

Matrix OutputPartition::invert(const Matrix& rows) const {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    out.row(permutation[i]) = rows.row(static_cast<Index>(i));
  }
  return out;
}

OutputPartition normalize_fault_structure(const Matrix& C2, const Matrix& D2, const Matrix& F) {
  const Index r = F.rows(), p = F.cols();
  if (C2.rows() != r || D2.rows() != r) throw DimensionError("C2, D2 and F need equal row counts");
  if (!(p >= 1 && p < r)) throw PreconditionError("fault count must satisfy r > p >= 1");
  if (column_rank(F) != p) throw PreconditionError("fault direction F must have full column rank");

  const double tol = 1e-12 * std::max(1.0, max_abs(F));
  std::vector<Index> clean, faulty;
  for (Index i = 0; i < r; ++i) (F.row(i).cwiseAbs().maxCoeff() <= tol ? clean : faulty).push_back(i);
  if (static_cast<Index>(clean.size()) != r - p) {
    std::ostringstream os;
    os << "fault structure not separable: " << clean.size() << " of " << r
       << " sensors are fault-free but " << r - p
       << " are required (the reconstruction assumes some sensors are not potentially faulty)";
    throw FaultStructureError(os.str());
  }
  OutputPartition part;
  part.permutation = clean;
  part.permutation.insert(part.permutation.end(), faulty.begin(), faulty.end());
  part.split = r - p;
  const Matrix Fp = part.apply(F);
  part.F2 = Fp.bottomRows(p);
  Eigen::JacobiSVD<Matrix> svd(part.F2);
  const Vector s = svd.singularValues();
  part.F2_condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : INFINITY;
  if (!(part.F2_condition < 1e12)) {
    throw FaultStructureError("fault structure not separable: F2 is singular");
  }
  part.C2 = part.apply(C2);
  part.D2 = part.apply(D2);
  part.C21 = part.C2.topRows(r - p);
  part.C22 = part.C2.bottomRows(p);
  part.D21 = part.D2.topRows(r - p);
  part.D22 = part.D2.bottomRows(p);
  return part;
}

Matrix build_H(const Matrix& H1, const Matrix& F2) {
  const Index p = F2.rows();
  if (F2.cols() != p) throw DimensionError("F2 must be square");
  if (H1.rows() != p) throw DimensionError("H1 must have " + std::to_string(p) + " rows");
  Eigen::FullPivLU<Matrix> lu(F2);
  if (!lu.isInvertible()) throw PreconditionError("F2 is singular");
  Matrix H(p, H1.cols() + p);
  H << H1, lu.inverse();
  return H;
}

FaultOutputMap fault_output_map(const OutputPartition& part, const Matrix& H) {
  return FaultOutputMap{H, part.C2, part.D2, part.C21, part.D21};
}

FaultOutputMap FaultEstimator::output_map() const { return fault_output_map(partition, H); }

FaultSynthesis synthesize_fault_filter(const FaultModel& fm, const Matrix& H1,
                                       std::optional<double> gamma, double lambda,
                                       double epsilon, const SynthesisOptions& options) {
  FaultSynthesis out;
  out.partition = normalize_fault_structure(fm.base.C2(), fm.base.D2(), fm.F);
  out.H = build_H(H1, out.partition.F2);
  SynthesisSpec spec{PolytopicModel({fm.base}), Method::improved,
                     fault_output_map(out.partition, out.H)};
  out.outcome = gamma ? synthesize_at_gamma(spec, *gamma, lambda, epsilon, options)
                      : minimize_gamma(spec, lambda, epsilon, options);
  if (out.outcome.ok()) {
    out.estimator = FaultEstimator{out.outcome.result->filter, out.H, out.partition};
  }
  return out;
}

FaultReconstructor::FaultReconstructor(FaultEstimator est)
    : est_(std::move(est)), xhat_(Vector::Zero(est_.filter.states())) {}

Vector FaultReconstructor::step(const Vector& y, double dt) {
  const Index split = est_.partition.split;
  if (y.size() != split + est_.H.rows()) throw DimensionError("reconstruct: output sample size");
  const Vector y1 = y.head(split);
  const Vector yhat = est_.filter.Cf() * xhat_ + est_.filter.Df() * y1;
  const Vector fhat = est_.H * (y - yhat);
  xhat_ += dt * (est_.filter.Af() * xhat_ + est_.filter.Bf() * y1);
  return fhat;
}

double recommended_sample_period(const DeconvolutionFilter& filter, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  const double rho = filter.Af().eigenvalues().cwiseAbs().maxCoeff();
  const double target = rho > 0.0 ? std::min(1e-3, 0.2 / rho) : 1e-3;
  return std::max(1.0, std::floor(target / dt + 1e-9)) * dt;
}

Matrix reconstruct(const FaultEstimator& est, const Matrix& y, double sample_period, double dt) {
  if (!(dt > 0.0) || std::abs(sample_period - dt) > 1e-12 * dt) {
    throw PreconditionError("reconstruct: sample period differs from the filter step dt");
  }
  FaultReconstructor rec(est);
  Matrix f(est.H.rows(), y.cols());
  for (Index k = 0; k < y.cols(); ++k) f.col(k) = rec.step(y.col(k), dt);
  return f;
}

FaultModel pendulum_model(const PendulumParameters& p) {
  if (!(p.m > 0.0 && p.l > 0.0)) throw PreconditionError("pendulum needs m > 0 and l > 0");
  if (p.R1 < 0.0 || p.R2 < 0.0) throw PreconditionError("noise intensities must be nonnegative");
  const double J = p.m * p.l * p.l;
  Matrix A(2, 2), B1(2, 2), G1(2, 2), C2(2, 2), D2(2, 2), F(2, 1);
  A << 0.0, 1.0 / J, -p.kappa + p.m * p.g * p.l + p.k1, -p.zeta / J + p.k2;
  B1 << 0.0, 0.0, std::sqrt(p.R1), 0.0;
  G1 << 0.0, 0.0, 0.0, -1.0 / J;
  C2 << 0.0, 1.0, 1.0, 0.0;
  D2 << 0.0, std::sqrt(p.R2), 0.0, 0.0;
  F << 0.0, 1.0;
  StochasticLtiSystem sys(A, B1, Matrix::Zero(1, 2), C2, Matrix::Zero(1, 2), D2, G1,
                          Matrix::Zero(2, 2));
  return FaultModel(std::move(sys), F);
}

Vector FaultProfile::at(double t) const {
  if (times.empty()) throw PreconditionError("fault profile has no breakpoints");
  if (t <= times.front()) return values.col(0);
  if (t >= times.back()) return values.col(values.cols() - 1);
  std::size_t k = 1;
  while (times[k] < t) ++k;
  const double a = (t - times[k - 1]) / (times[k] - times[k - 1]);
  const Index i = static_cast<Index>(k);
  return (1.0 - a) * values.col(i - 1) + a * values.col(i);
}

FaultProfile FaultProfile::none(Index faults) {
  return FaultProfile{{0.0}, Matrix::Zero(faults, 1)};
}

FaultProfile FaultProfile::ramp_and_hold(double start, double slope, double level) {
  if (!(slope > 0.0)) throw PreconditionError("ramp slope must be positive");
  Matrix v(1, 2);
  v << 0.0, level;
  return FaultProfile{{start, start + level / slope}, v};
}

FaultRun simulate_fault_scenario(const FaultModel& fm, const FaultEstimator& est,
                                 const FaultScenario& sc) {
  const auto& sys = fm.base;
  const Dims& d = sys.dims();
  if (sc.disturbance.channels() != d.q) throw DimensionError("disturbance channel count");
  if (!(sc.dt > 0.0 && sc.horizon > 0.0)) throw PreconditionError("dt and horizon must be positive");
  const double ratio = sc.sample_period / sc.dt;
  const auto stride = static_cast<std::size_t>(std::llround(ratio));
  if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9 * ratio) {
    throw PreconditionError("sample period must be an integer multiple of dt");
  }
  const auto steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.dt));
  const Matrix w = sc.disturbance.samples(sc.dt, steps);
  const OutputPartition& part = est.partition;
  const Matrix C2 = part.C2, D2 = part.D2, F = part.apply(fm.F);

  const std::size_t samples = steps / stride + 1;
  FaultRun run;
  run.t.reserve(samples);
  run.f.resize(fm.faults(), samples);
  run.fhat.resize(fm.faults(), samples);
  run.y.resize(d.r, samples);

  std::mt19937_64 gen(sc.seed);
  std::normal_distribution<double> n01;
  const double sdt = std::sqrt(sc.dt);
  FaultReconstructor rec(est);
  Vector x = Vector::Zero(d.n);
  for (std::size_t k = 0;; ++k) {
    const Index kk = static_cast<Index>(k);
    if (k % stride == 0) {
      const double t = static_cast<double>(k) * sc.dt;
      const Index c = static_cast<Index>(k / stride);
      const Vector f = sc.fault.at(t);
      const Vector y = C2 * x + D2 * w.col(kk) + F * f;
      run.t.push_back(t);
      run.f.col(c) = f;
      run.y.col(c) = y;
      run.fhat.col(c) = rec.step(y, sc.sample_period);
    }
    if (k == steps) break;
    const double dB = sdt * n01(gen);
    x += (sys.A() * x + sys.B1() * w.col(kk)) * sc.dt + (sys.G1() * x + sys.G2() * w.col(kk)) * dB;
    if (!(x.norm() <= 1e9)) {
      throw BlowUpError("fault scenario diverged at step " + std::to_string(k + 1), 0, k + 1,
                        static_cast<double>(k + 1) * sc.dt);
    }
  }
  return run;
}

std::string fault_run_csv(const FaultRun& run, const std::string& header) {
  std::ostringstream os;
  if (!header.empty()) os << "# " << header << "\n";
  os << "t";
  for (Index i = 0; i < run.f.rows(); ++i) os << ",f" << i + 1;
  for (Index i = 0; i < run.fhat.rows(); ++i) os << ",fhat" << i + 1;
  for (Index i = 0; i < run.y.rows(); ++i) os << ",y" << i + 1;
  os << "\n";
  char buf[40];
  for (std::size_t c = 0; c < run.t.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%.17g", run.t[c]);
    os << buf;
    const Index ci = static_cast<Index>(c);
    auto put = [&](const Matrix& m) {
      for (Index i = 0; i < m.rows(); ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", m(i, ci));
        os << buf;
      }
    };
    put(run.f);
    put(run.fhat);
    put(run.y);
    os << "\n";
  }
  return os.str();
}

}  // namespace peakfilter
