#include "peakfilter/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace peakfilter {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(root + (index + 1) * 0x9E3779B97F4A7C15ull);
}

Index DisturbanceSpec::channels() const {
  return std::visit(
      [](const auto& k) -> Index {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sinusoid>) return static_cast<Index>(k.amplitude.size());
        else if constexpr (std::is_same_v<T, FilteredNoise>) return k.channels;
        else return k.levels.rows();
      },
      kind);
}

DisturbanceSpec DisturbanceSpec::zero(Index channels) {
  return DisturbanceSpec{Sinusoid{std::vector<double>(channels, 0.0),
                                  std::vector<double>(channels, 0.0),
                                  std::vector<double>(channels, 0.0)}};
}

Matrix DisturbanceSpec::samples(double dt, std::size_t steps) const {
  if (!(dt > 0.0)) throw PreconditionError("disturbance sampling needs dt > 0");
  const Index q = channels();
  Matrix w = Matrix::Zero(q, static_cast<Index>(steps + 1));
  if (const auto* s = std::get_if<Sinusoid>(&kind)) {
    if (s->frequency.size() != s->amplitude.size() || s->phase.size() != s->amplitude.size()) {
      throw DimensionError("sinusoid: amplitude, frequency and phase need one entry per channel");
    }
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      for (Index c = 0; c < q; ++c) {
        w(c, k) = s->amplitude[c] *
                  std::sin(2.0 * std::numbers::pi * s->frequency[c] * t + s->phase[c]);
      }
    }
  } else if (const auto* f = std::get_if<FilteredNoise>(&kind)) {
    if (!(f->bandwidth > 0.0) || !(f->peak_clamp >= 0.0)) {
      throw PreconditionError("filtered noise needs bandwidth > 0 and peak_clamp >= 0");
    }
    std::mt19937_64 gen(splitmix64(f->seed));
    std::normal_distribution<double> n01;
    // Ornstein–Uhlenbeck with unit stationary variance, exact discretization
    const double a = std::exp(-f->bandwidth * dt);
    const double b = std::sqrt(1.0 - a * a);
    Vector x(q);
    for (Index c = 0; c < q; ++c) x(c) = n01(gen);
    for (std::size_t k = 0; k <= steps; ++k) {
      Vector v = f->peak_clamp * x;
      const double nv = v.norm();
      if (nv > f->peak_clamp) v *= f->peak_clamp / nv;
      w.col(k) = v;
      for (Index c = 0; c < q; ++c) x(c) = a * x(c) + b * n01(gen);
    }
  } else {
    const auto& p = std::get<PiecewiseConstant>(kind);
    if (!(p.dwell > 0.0) || p.levels.cols() == 0) {
      throw PreconditionError("piecewise constant needs dwell > 0 and at least one level");
    }
    for (std::size_t k = 0; k <= steps; ++k) {
      const auto idx = static_cast<Index>(std::floor(static_cast<double>(k) * dt / p.dwell)) %
                       p.levels.cols();
      w.col(k) = p.levels.col(idx);
    }
  }
  return w;
}

double DisturbanceSpec::peak_bound() const {
  if (const auto* s = std::get_if<Sinusoid>(&kind)) {
    double acc = 0.0;
    for (double a : s->amplitude) acc += a * a;
    return std::sqrt(acc);
  }
  if (const auto* f = std::get_if<FilteredNoise>(&kind)) return f->peak_clamp;
  const auto& p = std::get<PiecewiseConstant>(kind);
  double best = 0.0;
  for (Index c = 0; c < p.levels.cols(); ++c) best = std::max(best, p.levels.col(c).norm());
  return best;
}

std::string DisturbanceSpec::describe() const {
  std::ostringstream os;
  if (const auto* s = std::get_if<Sinusoid>(&kind)) {
    os << "sinusoid";
    for (std::size_t c = 0; c < s->amplitude.size(); ++c) {
      os << (c ? "; " : " ") << s->amplitude[c] << "@" << s->frequency[c] << "Hz+" << s->phase[c];
    }
  } else if (const auto* f = std::get_if<FilteredNoise>(&kind)) {
    os << "filtered_noise bandwidth=" << f->bandwidth << " clamp=" << f->peak_clamp
       << " seed=" << f->seed;
  } else {
    const auto& p = std::get<PiecewiseConstant>(kind);
    os << "piecewise_constant levels=" << p.levels.cols() << " dwell=" << p.dwell;
  }
  return os.str();
}

double default_horizon(const Matrix& A) {
  const double a = spectral_abscissa(A);
  if (!(a < 0.0)) throw PreconditionError("default horizon needs a Hurwitz closed loop");
  return 20.0 / std::abs(a);
}

namespace {

constexpr double kBlowUp = 1e9;

// Row-major copies for the hot loop.
struct Kernel {
  Index n = 0, q = 0, p = 0;
  std::vector<double> A, G1, C;
  Kernel(const AugmentedSystem& s) : n(s.states()), q(s.disturbances()), p(s.outputs()) {
    auto rm = [](const Matrix& m) {
      std::vector<double> v(static_cast<std::size_t>(m.size()));
      for (Index i = 0; i < m.rows(); ++i)
        for (Index k = 0; k < m.cols(); ++k) v[i * m.cols() + k] = m(i, k);
      return v;
    };
    A = rm(s.A);
    G1 = rm(s.G1);
    C = rm(s.C);
  }
};

// Path-independent forcing terms B̃ω, G̃2ω, D̃ω on the grid.
struct Forcing {
  Matrix Bw, Gw, Dw;
};

Forcing forcing(const AugmentedSystem& s, const Matrix& w) {
  return Forcing{s.B * w, s.G2 * w, s.D * w};
}

std::size_t step_count(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw PreconditionError("dt and horizon must be positive");
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

void check_system(const AugmentedSystem& s, Index q) {
  if (s.disturbances() != q) {
    throw DimensionError("disturbance has " + std::to_string(q) + " channels, system expects " +
                         std::to_string(s.disturbances()));
  }
}

// Runs one path. `visit(k, xi, z)` is called at every grid index k = 0..steps.
template <typename Visit>
void run_path(const Kernel& K, const Forcing& F, double dt, std::size_t steps,
              std::uint64_t seed, std::size_t path, std::vector<double> xi, Visit&& visit) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  const double sdt = std::sqrt(dt);
  const Index n = K.n, p = K.p;
  std::vector<double> next(n), z(p);
  for (std::size_t k = 0;; ++k) {
    for (Index i = 0; i < p; ++i) {
      double acc = F.Dw(i, k);
      for (Index j = 0; j < n; ++j) acc += K.C[i * n + j] * xi[j];
      z[i] = acc;
    }
    visit(k, xi, z);
    if (k == steps) break;
    const double dB = sdt * n01(gen);
    double norm2 = 0.0;
    for (Index i = 0; i < n; ++i) {
      double drift = F.Bw(i, k), diff = F.Gw(i, k);
      for (Index j = 0; j < n; ++j) {
        drift += K.A[i * n + j] * xi[j];
        diff += K.G1[i * n + j] * xi[j];
      }
      next[i] = xi[i] + drift * dt + diff * dB;
      norm2 += next[i] * next[i];
    }
    xi.swap(next);
    if (!(norm2 <= kBlowUp * kBlowUp)) {
      std::ostringstream os;
      os << "path " << path << " diverged at step " << k + 1 << " (t = " << (k + 1) * dt
         << ", |xi| = " << std::sqrt(norm2) << ")";
      throw BlowUpError(os.str(), path, k + 1, (k + 1) * dt);
    }
  }
}

unsigned thread_count(unsigned requested, std::size_t work) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(work, 1)));
}

// Runs body(i) for i in [0, count) across threads; rethrows the first exception by index.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&](unsigned id) {
    for (std::size_t i = id; i < count; i += threads) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned id = 1; id < threads; ++id) pool.emplace_back(worker, id);
  worker(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Trajectory euler_maruyama(const AugmentedSystem& aug, const DisturbanceSpec& spec,
                          const SimulationOptions& o) {
  check_system(aug, spec.channels());
  const double horizon = o.horizon ? *o.horizon : default_horizon(aug.A);
  const std::size_t steps = step_count(horizon, o.dt);
  const std::size_t stride = std::max<std::size_t>(1, o.record_stride);
  const Matrix w = spec.samples(o.dt, steps);
  const Kernel K(aug);
  const Forcing F = forcing(aug, w);

  std::vector<double> xi0(aug.states(), 0.0);
  if (o.initial_state) {
    if (o.initial_state->size() != aug.states()) throw DimensionError("initial state size mismatch");
    for (Index i = 0; i < aug.states(); ++i) xi0[i] = (*o.initial_state)(i);
  }
  const std::size_t samples = steps / stride + 1;
  Trajectory tr;
  tr.seed = o.seed;
  tr.dt = o.dt;
  tr.t.reserve(samples);
  tr.xi.resize(aug.states(), samples);
  tr.z.resize(aug.outputs(), samples);
  tr.w.resize(aug.disturbances(), samples);
  run_path(K, F, o.dt, steps, o.seed, 0, xi0,
           [&](std::size_t k, const std::vector<double>& xi, const std::vector<double>& z) {
             if (k % stride) return;
             const Index c = static_cast<Index>(k / stride);
             if (c >= static_cast<Index>(samples)) return;
             tr.t.push_back(static_cast<double>(k) * o.dt);
             for (Index i = 0; i < aug.states(); ++i) tr.xi(i, c) = xi[i];
             for (Index i = 0; i < aug.outputs(); ++i) tr.z(i, c) = z[i];
             tr.w.col(c) = w.col(static_cast<Index>(k));
           });
  return tr;
}

PeakEstimate peak_to_peak_estimate(const AugmentedSystem& aug, const DisturbanceSpec& spec,
                                   const EstimateOptions& o) {
  if (o.trials < 2) throw PreconditionError("peak-to-peak estimate needs at least 2 trials");
  check_system(aug, spec.channels());
  const double horizon = o.horizon ? *o.horizon : default_horizon(aug.A);
  const std::size_t steps = step_count(horizon, o.dt);
  const Matrix w = spec.samples(o.dt, steps);
  const Kernel K(aug);
  const Forcing F = forcing(aug, w);

  const std::size_t stride = std::max<std::size_t>(1, (steps + o.max_record) / o.max_record);
  const std::size_t record = steps / stride + 1;

  PeakEstimate est;
  est.trials = o.trials;
  est.steps = steps;
  for (std::size_t k = 0; k <= steps; k += stride) {
    est.input_peak = std::max(est.input_peak, w.col(static_cast<Index>(k)).norm());
  }

  // squared output norm per path on the decimated grid
  std::vector<std::vector<double>> sq(o.trials, std::vector<double>(record, 0.0));
  const std::vector<double> xi0(aug.states(), 0.0);
  parallel_for(o.trials, thread_count(o.threads, o.trials), [&](std::size_t i) {
    auto& row = sq[i];
    run_path(K, F, o.dt, steps, sub_seed(o.seed, i), i, xi0,
             [&](std::size_t k, const std::vector<double>&, const std::vector<double>& z) {
               if (k % stride) return;
               double acc = 0.0;
               for (double v : z) acc += v * v;
               row[k / stride] = acc;
             });
  });

  auto sup_rms = [&](const std::vector<std::size_t>* pick, std::size_t* at) {
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t r = 0; r < record; ++r) {
      double acc = 0.0;
      for (std::size_t i = 0; i < o.trials; ++i) acc += sq[pick ? (*pick)[i] : i][r];
      if (acc > best) {
        best = acc;
        arg = r;
      }
    }
    if (at) *at = arg;
    return std::sqrt(best / static_cast<double>(o.trials));
  };

  std::size_t at = 0;
  est.output_peak = sup_rms(nullptr, &at);
  est.time_of_peak = static_cast<double>(at * stride) * o.dt;
  if (!est.defined()) {
    est.ratio = std::numeric_limits<double>::quiet_NaN();
    est.standard_error = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  est.ratio = est.output_peak / est.input_peak;

  if (o.bootstrap >= 2) {
    std::mt19937_64 gen(sub_seed(o.seed, 0xB00757A9ull));
    std::uniform_int_distribution<std::size_t> pick(0, o.trials - 1);
    std::vector<std::size_t> idx(o.trials);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < o.bootstrap; ++b) {
      for (auto& v : idx) v = pick(gen);
      const double r = sup_rms(&idx, nullptr) / est.input_peak;
      s1 += r;
      s2 += r * r;
    }
    const double nb = static_cast<double>(o.bootstrap);
    const double mean = s1 / nb;
    est.standard_error = std::sqrt(std::max(0.0, (s2 - nb * mean * mean) / (nb - 1.0)));
  }
  return est;
}

DecayVerdict esms_empirical(const Matrix& A, const Matrix& G1, const EsmsEmpiricalOptions& o) {
  if (A.rows() != A.cols() || G1.rows() != A.rows() || G1.cols() != A.cols()) {
    throw DimensionError("esms_empirical: A and G1 must be square of equal size");
  }
  const Index n = A.rows();
  AugmentedSystem s{A, Matrix::Zero(n, 1), G1, Matrix::Zero(n, 1), Matrix::Zero(1, n),
                    Matrix::Zero(1, 1)};
  const std::size_t steps = step_count(o.horizon, o.dt);
  const std::size_t stride = std::max<std::size_t>(1, steps / 200);
  const std::size_t record = steps / stride + 1;
  const Kernel K(s);
  const Forcing F = forcing(s, Matrix::Zero(1, static_cast<Index>(steps + 1)));

  std::vector<std::vector<double>> sq(o.trials, std::vector<double>(record, 0.0));
  parallel_for(o.trials, thread_count(0, o.trials), [&](std::size_t i) {
    std::mt19937_64 gen(sub_seed(o.seed ^ 0x5A5A5A5Aull, i));
    std::normal_distribution<double> n01;
    std::vector<double> x0(n);
    double nn = 0.0;
    for (auto& v : x0) {
      v = n01(gen);
      nn += v * v;
    }
    for (auto& v : x0) v /= std::sqrt(nn);
    run_path(K, F, o.dt, steps, sub_seed(o.seed, i), i, x0,
             [&](std::size_t k, const std::vector<double>& xi, const std::vector<double>&) {
               if (k % stride) return;
               double acc = 0.0;
               for (double v : xi) acc += v * v;
               sq[i][k / stride] = acc;
             });
  });

  // least-squares line through (t, log mean ‖x‖²)
  double st = 0, sy = 0, stt = 0, sty = 0, syy = 0;
  std::size_t cnt = 0;
  for (std::size_t r = 0; r < record; ++r) {
    double m = 0.0;
    for (std::size_t i = 0; i < o.trials; ++i) m += sq[i][r];
    m /= static_cast<double>(o.trials);
    if (!(m > 0.0)) continue;
    const double t = static_cast<double>(r * stride) * o.dt, y = std::log(m);
    st += t; sy += y; stt += t * t; sty += t * y; syy += y * y;
    ++cnt;
  }
  DecayVerdict v;
  if (cnt < 3) return v;
  const double N = static_cast<double>(cnt);
  const double vt = stt - st * st / N, vy = syy - sy * sy / N, cty = sty - st * sy / N;
  v.slope = cty / vt;
  v.r_squared = vy > 0.0 ? cty * cty / (vt * vy) : 1.0;
  v.stable = v.slope <= -1e-3 && v.r_squared >= 0.9;
  return v;
}

std::string filter_hash(const DeconvolutionFilter& f) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const Matrix& m) {
    char buf[40];
    for (Index i = 0; i < m.rows(); ++i)
      for (Index k = 0; k < m.cols(); ++k) {
        const int len = std::snprintf(buf, sizeof buf, "%.17g,", m(i, k));
        for (int c = 0; c < len; ++c) {
          h ^= static_cast<unsigned char>(buf[c]);
          h *= 0x100000001b3ull;
        }
      }
  };
  feed(f.Af());
  feed(f.Bf());
  feed(f.Cf());
  feed(f.Df());
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::string trajectory_csv(const Trajectory& tr, const std::string& model_name,
                           const std::string& filter_digest) {
  std::ostringstream os;
  os << "# model=" << model_name << " filter=" << filter_digest << " seed=" << tr.seed
     << " dt=" << tr.dt << "\n";
  os << "t";
  for (Index i = 0; i < tr.xi.rows(); ++i) os << ",xi" << i + 1;
  for (Index i = 0; i < tr.z.rows(); ++i) os << ",z" << i + 1;
  for (Index i = 0; i < tr.w.rows(); ++i) os << ",w" << i + 1;
  os << "\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    os << buf;
  };
  for (std::size_t c = 0; c < tr.t.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.t[c]);
    os << buf;
    const Index ci = static_cast<Index>(c);
    for (Index i = 0; i < tr.xi.rows(); ++i) put(tr.xi(i, ci));
    for (Index i = 0; i < tr.z.rows(); ++i) put(tr.z(i, ci));
    for (Index i = 0; i < tr.w.rows(); ++i) put(tr.w(i, ci));
    os << "\n";
  }
  return os.str();
}

}  // namespace peakfilter
