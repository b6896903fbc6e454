#pragma once

#include "peakfilter/fault.hpp"
#include "peakfilter/model_io.hpp"
#include "peakfilter/synthesis.hpp"

#include <random>

namespace testing {

using namespace peakfilter;

inline PolytopicModel example1() {
  return *load_model_file(resolve_model_path("example1")).model;
}

inline DeconvolutionFilter reference_filter(const std::string& name) {
  return load_filter_file(resolve_filter_path(name));
}

inline StochasticLtiSystem example1_center() {
  const double half[] = {0.5, 0.5};
  return combine_vertices(example1(), half);
}

inline Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = *it++;
  return m;
}

inline Matrix random_matrix(std::mt19937_64& g, Index r, Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = u(g);
  return m;
}

/// Random plant with a mean-square stable (A, G1) pair, entries bounded by 1.
inline StochasticLtiSystem random_esms_plant(std::mt19937_64& g, Index n = 2, Index q = 1,
                                             Index r = 1, Index m = 1) {
  std::uniform_real_distribution<double> u(0.3, 1.5);
  for (;;) {
    Matrix A = random_matrix(g, n, n);
    const double a = spectral_abscissa(A);
    A -= (a + u(g)) * Matrix::Identity(n, n);
    const Matrix G1 = random_matrix(g, n, n, 0.4);
    if (!esms_spectral_oracle(A, G1).stable) continue;
    return StochasticLtiSystem(A, random_matrix(g, n, q), random_matrix(g, m, n),
                               random_matrix(g, r, n), random_matrix(g, m, q),
                               random_matrix(g, r, q), G1, random_matrix(g, n, q, 0.3));
  }
}

/// Example-1 closed loop at the polytope center with the given reference filter.
inline AugmentedSystem center_loop(const std::string& filter) {
  return build_augmented(example1_center(), reference_filter(filter));
}

}  // namespace testing
