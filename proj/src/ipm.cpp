// Infeasible-start primal-dual path following with the HKM search direction and
// Mehrotra predictor-corrector steps.

#include "ipm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace peakfilter::detail {

const char* to_string(IpmResult::Status s) {
  switch (s) {
    case IpmResult::Status::converged: return "converged";
    case IpmResult::Status::converged_relaxed: return "converged (relaxed tolerance)";
    case IpmResult::Status::diverged: return "diverged";
    case IpmResult::Status::stalled: return "stalled";
    case IpmResult::Status::iteration_limit: return "iteration limit";
    case IpmResult::Status::failed: return "failed";
  }
  return "?";
}

namespace {

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Largest α ≤ cap with X + α·dX ≽ 0, for X ≻ 0.
double max_step(const Matrix& X, const Matrix& dX) {
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Matrix Linv = llt.matrixL().solve(Matrix::Identity(X.rows(), X.cols()));
  const Matrix W = sym(Linv * dX * Linv.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(W, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step_lp(const Vector& x, const Vector& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

struct State {
  Vector y;
  std::vector<Matrix> X, Z;
  Vector x, z;
};

struct Direction {
  Vector dy;
  std::vector<Matrix> dX, dZ;
  Vector dx, dz;
};

class Solver {
 public:
  Solver(const ConicData& d, const IpmOptions& o) : d_(d), o_(o) {
    nb_ = d_.C.size();
    dim_ = static_cast<double>(d_.c_lp.size());
    for (const auto& c : d_.C) dim_ += static_cast<double>(c.rows());
    norm_b_ = d_.b.norm();
    double nc = d_.c_lp.squaredNorm();
    for (const auto& c : d_.C) nc += c.squaredNorm();
    norm_c_ = std::sqrt(nc);
  }

  IpmResult run();

 private:
  void initial_point();
  Vector apply_A(const std::vector<Matrix>& X, const Vector& x) const;
  std::vector<Matrix> apply_At(const Vector& y) const;
  bool factor(const State& s);
  Direction direction(const State& s, const std::vector<Matrix>& Rd, const Vector& rd,
                      const Vector& rp, double sigma_mu, const Direction* pred) const;
  double mu(const State& s) const;

  const ConicData& d_;
  const IpmOptions& o_;
  std::size_t nb_ = 0;
  double dim_ = 0.0;
  double norm_b_ = 0.0;
  double norm_c_ = 0.0;
  State s_;
  std::vector<Matrix> Zinv_;
  Eigen::LLT<Matrix> schur_;
  Matrix M_;
};

void Solver::initial_point() {
  s_.y = Vector::Zero(d_.m);
  s_.X.resize(nb_);
  s_.Z.resize(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    const Index n = d_.C[k].rows();
    const double rn = std::sqrt(static_cast<double>(n));
    double xi = std::max(10.0, rn);
    double eta = std::max(10.0, rn);
    double amax = 0.0;
    for (const auto& [i, a] : d_.A[k]) {
      const double na = a.norm();
      amax = std::max(amax, na);
      xi = std::max(xi, rn * (1.0 + std::abs(d_.b(i))) / (1.0 + na));
    }
    eta = std::max(eta, (1.0 + std::max(amax, d_.C[k].norm())) / rn);
    s_.X[k] = xi * Matrix::Identity(n, n);
    s_.Z[k] = eta * Matrix::Identity(n, n);
  }
  const Index nl = d_.c_lp.size();
  if (nl > 0) {
    double xi = 10.0, eta = 10.0;
    for (Index i = 0; i < d_.m; ++i) {
      const double na = d_.A_lp.col(i).norm();
      xi = std::max(xi, (1.0 + std::abs(d_.b(i))) / (1.0 + na));
      eta = std::max(eta, 1.0 + na);
    }
    eta = std::max(eta, 1.0 + d_.c_lp.cwiseAbs().maxCoeff() / std::sqrt(double(nl)));
    s_.x = Vector::Constant(nl, xi);
    s_.z = Vector::Constant(nl, eta);
  } else {
    s_.x.resize(0);
    s_.z.resize(0);
  }
}

Vector Solver::apply_A(const std::vector<Matrix>& X, const Vector& x) const {
  Vector out = Vector::Zero(d_.m);
  for (std::size_t k = 0; k < nb_; ++k) {
    for (const auto& [i, a] : d_.A[k]) out(i) += inner(a, X[k]);
  }
  if (x.size() > 0) out += d_.A_lp.transpose() * x;
  return out;
}

std::vector<Matrix> Solver::apply_At(const Vector& y) const {
  std::vector<Matrix> out(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    out[k] = Matrix::Zero(d_.C[k].rows(), d_.C[k].cols());
    for (const auto& [i, a] : d_.A[k]) out[k] += y(i) * a;
  }
  return out;
}

double Solver::mu(const State& s) const {
  double v = s.x.size() > 0 ? s.x.dot(s.z) : 0.0;
  for (std::size_t k = 0; k < nb_; ++k) v += inner(s.X[k], s.Z[k]);
  return v / dim_;
}

bool Solver::factor(const State& s) {
  Zinv_.resize(nb_);
  Matrix M = Matrix::Zero(d_.m, d_.m);
  for (std::size_t k = 0; k < nb_; ++k) {
    Eigen::LLT<Matrix> llt(s.Z[k]);
    if (llt.info() != Eigen::Success) return false;
    Zinv_[k] = sym(llt.solve(Matrix::Identity(s.Z[k].rows(), s.Z[k].cols())));
    const auto& list = d_.A[k];
    std::vector<Matrix> B(list.size());
    for (std::size_t j = 0; j < list.size(); ++j) B[j] = s.X[k] * list[j].second * Zinv_[k];
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i; j < list.size(); ++j) {
        const double v = inner(list[i].second, B[j]);
        M(list[i].first, list[j].first) += v;
        if (i != j) M(list[j].first, list[i].first) += v;
      }
    }
  }
  if (s.x.size() > 0) {
    const Vector w = s.x.cwiseQuotient(s.z);
    M += d_.A_lp.transpose() * w.asDiagonal() * d_.A_lp;
  }
  M = sym(M);
  M_ = M;
  schur_.compute(M);
  if (schur_.info() != Eigen::Success) {
    // Nearly singular Schur complement late in the run; a tiny diagonal shift keeps the
    // direction usable.
    const double shift = 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
    schur_.compute(M + shift * Matrix::Identity(d_.m, d_.m));
    if (schur_.info() != Eigen::Success) return false;
  }
  return true;
}

Direction Solver::direction(const State& s, const std::vector<Matrix>& Rd, const Vector& rd,
                            const Vector& rp, double sigma_mu, const Direction* pred) const {
  // H = σμ Z⁻¹ − X − X Rd Z⁻¹ − dXa dZa Z⁻¹ (last term only in the corrector)
  std::vector<Matrix> H(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    H[k] = sigma_mu * Zinv_[k] - s.X[k] - s.X[k] * Rd[k] * Zinv_[k];
    if (pred) H[k] -= pred->dX[k] * pred->dZ[k] * Zinv_[k];
  }
  Vector h_lp;
  if (s.x.size() > 0) {
    h_lp = (Vector::Constant(s.x.size(), sigma_mu) - s.x.cwiseProduct(rd)).cwiseQuotient(s.z) -
           s.x;
    if (pred) h_lp -= pred->dx.cwiseProduct(pred->dz).cwiseQuotient(s.z);
  }
  Vector rhs = rp - apply_A(H, h_lp.size() > 0 ? h_lp : Vector());
  Direction dir;
  dir.dy = schur_.solve(rhs);
  // iterative refinement; the Schur complement gets badly conditioned near the optimum
  for (int r = 0; r < 2; ++r) dir.dy += schur_.solve(rhs - M_ * dir.dy);
  const std::vector<Matrix> Ady = apply_At(dir.dy);
  dir.dZ.resize(nb_);
  dir.dX.resize(nb_);
  for (std::size_t k = 0; k < nb_; ++k) {
    dir.dZ[k] = sym(Rd[k] - Ady[k]);
    Matrix dx = sigma_mu * Zinv_[k] - s.X[k] - s.X[k] * dir.dZ[k] * Zinv_[k];
    if (pred) dx -= pred->dX[k] * pred->dZ[k] * Zinv_[k];
    dir.dX[k] = sym(dx);
  }
  if (s.x.size() > 0) {
    dir.dz = rd - d_.A_lp * dir.dy;
    dir.dx = (Vector::Constant(s.x.size(), sigma_mu) - s.x.cwiseProduct(dir.dz))
                 .cwiseQuotient(s.z) -
             s.x;
    if (pred) dir.dx -= pred->dx.cwiseProduct(pred->dz).cwiseQuotient(s.z);
  }
  return dir;
}

IpmResult Solver::run() {
  IpmResult res;
  initial_point();
  const double inf = std::numeric_limits<double>::infinity();
  double best_merit = inf;
  double best_mu = inf;
  int stall = 0;
  // best iterate so far; late iterations can drift once the Schur system loses accuracy
  State kept;
  IpmResult kept_res;
  double kept_merit = inf;

  for (int it = 0;; ++it) {
    // Residuals.
    const Vector rp = d_.b - apply_A(s_.X, s_.x);
    const std::vector<Matrix> Aty = apply_At(s_.y);
    std::vector<Matrix> Rd(nb_);
    double rd2 = 0.0;
    for (std::size_t k = 0; k < nb_; ++k) {
      Rd[k] = sym(d_.C[k] - Aty[k] - s_.Z[k]);
      rd2 += Rd[k].squaredNorm();
    }
    Vector rd;
    if (s_.x.size() > 0) {
      rd = d_.c_lp - d_.A_lp * s_.y - s_.z;
      rd2 += rd.squaredNorm();
    }
    double pobj = s_.x.size() > 0 ? d_.c_lp.dot(s_.x) : 0.0;
    for (std::size_t k = 0; k < nb_; ++k) pobj += inner(d_.C[k], s_.X[k]);
    const double dobj = d_.b.dot(s_.y);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = rp.norm() / (1.0 + norm_b_);
    const double dinf = std::sqrt(rd2) / (1.0 + norm_c_);
    const double m = mu(s_);

    res.iterations = it;
    res.primal_objective = pobj;
    res.dual_objective = dobj;
    res.relative_gap = gap;
    res.primal_infeasibility = pinf;
    res.dual_infeasibility = dinf;

    if (o_.verbose) {
      std::fprintf(stderr, "ipm %3d  pobj %+.10e  dobj %+.10e  gap %.2e  pinf %.2e  dinf %.2e\n",
                   it, pobj, dobj, gap, pinf, dinf);
    }
    const double merit = std::max({gap, pinf, dinf});
    if (merit < kept_merit) {
      kept_merit = merit;
      kept = s_;
      kept_res = res;
    }
    if (merit <= o_.tolerance) {
      res.status = IpmResult::Status::converged;
      break;
    }
    if (!std::isfinite(merit) || std::abs(pobj) > 1e14 || std::abs(dobj) > 1e14) {
      res.status = IpmResult::Status::diverged;
      break;
    }
    if (it >= o_.max_iterations) {
      res.status = merit <= o_.relaxed_tolerance ? IpmResult::Status::converged_relaxed
                                                 : IpmResult::Status::iteration_limit;
      break;
    }
    // the relative gap can sit near 1 for a long time while μ still drops by decades
    if (merit < 0.5 * best_merit || m < 0.5 * best_mu) {
      best_merit = std::min(best_merit, merit);
      best_mu = std::min(best_mu, m);
      stall = 0;
    } else if (++stall >= 12) {
      res.status = merit <= o_.relaxed_tolerance ? IpmResult::Status::converged_relaxed
                                                 : IpmResult::Status::stalled;
      break;
    }

    if (!factor(s_)) {
      res.status = merit <= o_.relaxed_tolerance ? IpmResult::Status::converged_relaxed
                                                 : IpmResult::Status::failed;
      break;
    }

    // Predictor.
    const Direction pred = direction(s_, Rd, rd, rp, 0.0, nullptr);
    double ap = 1.0, ad = 1.0;
    for (std::size_t k = 0; k < nb_; ++k) {
      ap = std::min(ap, max_step(s_.X[k], pred.dX[k]));
      ad = std::min(ad, max_step(s_.Z[k], pred.dZ[k]));
    }
    if (s_.x.size() > 0) {
      ap = std::min(ap, max_step_lp(s_.x, pred.dx));
      ad = std::min(ad, max_step_lp(s_.z, pred.dz));
    }
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb_; ++k) {
      mu_aff += inner(s_.X[k] + ap * pred.dX[k], s_.Z[k] + ad * pred.dZ[k]);
    }
    if (s_.x.size() > 0) mu_aff += (s_.x + ap * pred.dx).dot(s_.z + ad * pred.dz);
    mu_aff /= dim_;
    const double ratio = std::clamp(mu_aff / m, 0.0, 1.0);
    // Keep some centering while the iterate is still infeasible.
    double sigma = std::pow(ratio, 3.0);
    if (std::max(pinf, dinf) > 1e-2) sigma = std::max(sigma, 0.1);

    // Corrector.
    const Direction dir = direction(s_, Rd, rd, rp, sigma * m, &pred);
    ap = inf;
    ad = inf;
    for (std::size_t k = 0; k < nb_; ++k) {
      ap = std::min(ap, max_step(s_.X[k], dir.dX[k]));
      ad = std::min(ad, max_step(s_.Z[k], dir.dZ[k]));
    }
    if (s_.x.size() > 0) {
      ap = std::min(ap, max_step_lp(s_.x, dir.dx));
      ad = std::min(ad, max_step_lp(s_.z, dir.dz));
    }
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (ap < 1e-12 && ad < 1e-12) {
      res.status = merit <= o_.relaxed_tolerance ? IpmResult::Status::converged_relaxed
                                                 : IpmResult::Status::stalled;
      break;
    }
    for (std::size_t k = 0; k < nb_; ++k) {
      s_.X[k] = sym(s_.X[k] + ap * dir.dX[k]);
      s_.Z[k] = sym(s_.Z[k] + ad * dir.dZ[k]);
    }
    if (s_.x.size() > 0) {
      s_.x += ap * dir.dx;
      s_.z += ad * dir.dz;
    }
    s_.y += ad * dir.dy;
  }

  if (res.status != IpmResult::Status::converged &&
      kept_merit < std::max({res.relative_gap, res.primal_infeasibility, res.dual_infeasibility})) {
    const auto status = res.status;
    const int iterations = res.iterations;
    res = kept_res;
    res.iterations = iterations;
    res.status = kept_merit <= o_.relaxed_tolerance ? IpmResult::Status::converged_relaxed : status;
    s_ = std::move(kept);
  }
  res.y = s_.y;
  res.X = s_.X;
  res.Z = s_.Z;
  res.x_lp = s_.x;
  res.z_lp = s_.z;
  return res;
}

}  // namespace

IpmResult solve_dual_form(const ConicData& data, const IpmOptions& options) {
  if (data.m <= 0) throw PreconditionError("solve_dual_form: no decision variables");
  if (data.A.size() != data.C.size()) throw DimensionError("solve_dual_form: block count mismatch");
  if (data.c_lp.size() != data.A_lp.rows() || (data.c_lp.size() > 0 && data.A_lp.cols() != data.m)) {
    throw DimensionError("solve_dual_form: LP block shape mismatch");
  }
  Solver s(data, options);
  return s.run();
}

}  // namespace peakfilter::detail
