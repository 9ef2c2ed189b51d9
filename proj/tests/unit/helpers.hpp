#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ekmix/grid.hpp"
#include "ekmix/linalg.hpp"
#include "ekmix/model.hpp"

namespace ekmix::test {

// Random symmetric b with a spanning tree of positive edges plus extra edges.
inline Matrix random_connected_b(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(0.1, 5.0);
  std::bernoulli_distribution extra(0.4);
  Matrix b = Matrix::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) {
    std::uniform_int_distribution<Eigen::Index> parent(0, i - 1);
    const Eigen::Index p = parent(rng);
    b(i, p) = b(p, i) = w(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (b(i, j) == 0.0 && extra(rng)) b(i, j) = b(j, i) = w(rng);
    }
  }
  return b;
}

// Log-uniform densities in [lo, hi].
inline Vector random_rho(Eigen::Index n, std::mt19937_64& rng, double lo = 0.1, double hi = 10.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Vector rho(n);
  for (Eigen::Index i = 0; i < n; ++i) rho(i) = std::exp(u(rng));
  return rho;
}

inline Matrix pair_b(double b12) {
  Matrix b(2, 2);
  b << 0.0, b12, b12, 0.0;
  return b;
}

inline MixtureModel two_species(double eps, CapillarityKind kind = CapillarityKind::constant,
                                double k = 0.01, double b12 = 1.0) {
  MixtureModel m;
  m.laws = {EnergyLaw::quadratic(1.0, kind, k), EnergyLaw::quadratic(1.0, kind, k)};
  m.b = pair_b(b12);
  m.eps = eps;
  return m;
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ekmix::test
