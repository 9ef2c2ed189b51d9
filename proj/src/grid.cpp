#include "ekmix/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ekmix/energy.hpp"
#include "ekmix/errors.hpp"

namespace ekmix {

Grid1D::Grid1D(std::size_t n_cells, double length) : n_(n_cells), length_(length) {
  if (n_cells < 8) throw ValidationError("grid needs at least 8 cells");
  if (!(length > 0.0) || !std::isfinite(length)) throw ValidationError("grid length must be positive");
}

ScalarField grad(const Grid1D& grid, const ScalarField& f) {
  const std::size_t n = grid.size();
  const double inv = 0.5 / grid.dx();
  ScalarField out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (f[grid.next(i)] - f[grid.prev(i)]) * inv;
  return out;
}

ScalarField laplacian(const Grid1D& grid, const ScalarField& f) {
  const std::size_t n = grid.size();
  const double inv = 1.0 / (grid.dx() * grid.dx());
  ScalarField out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (f[grid.next(i)] - 2.0 * f[i] + f[grid.prev(i)]) * inv;
  }
  return out;
}

ScalarField div_flux(const Grid1D& grid, const ScalarField& face_flux) {
  const std::size_t n = grid.size();
  const double inv = 1.0 / grid.dx();
  ScalarField out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (face_flux[i] - face_flux[grid.prev(i)]) * inv;
  return out;
}

double integrate(const Grid1D& grid, const ScalarField& f) {
  double sum = 0.0;
  for (double v : f) sum += v;
  return sum * grid.dx();
}

MixtureState::MixtureState(const Grid1D& g, std::size_t species)
    : grid(g),
      rho(species, ScalarField(g.size(), 0.0)),
      mom(species, ScalarField(g.size(), 0.0)) {}

void MixtureState::validate(double floor) const {
  if (rho.empty() || rho.size() != mom.size()) throw ValidationError("state has inconsistent species");
  for (std::size_t s = 0; s < rho.size(); ++s) {
    if (rho[s].size() != grid.size() || mom[s].size() != grid.size()) {
      throw ValidationError("state field length does not match grid");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!std::isfinite(rho[s][i]) || !std::isfinite(mom[s][i])) {
        throw ValidationError("state contains non-finite values");
      }
      if (rho[s][i] < floor) {
        throw ValidationError("density of species " + std::to_string(s + 1) + " below floor");
      }
    }
  }
}

ScalarField MixtureState::velocity(std::size_t s) const {
  ScalarField v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mom[s][i] / rho[s][i];
  return v;
}

ScalarField MixtureState::total_density() const {
  ScalarField out(grid.size(), 0.0);
  for (const auto& r : rho) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i];
  }
  return out;
}

ScalarField MixtureState::total_momentum() const {
  ScalarField out(grid.size(), 0.0);
  for (const auto& m : mom) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += m[i];
  }
  return out;
}

double MixtureState::min_density() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& r : rho) lo = std::min(lo, *std::min_element(r.begin(), r.end()));
  return lo;
}

ScalarField barycentric_velocity(const MixtureState& state) {
  const ScalarField total = state.total_density();
  ScalarField v = state.total_momentum();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(total[i] >= kRhoMin)) throw DomainError("total density below floor");
    v[i] /= total[i];
  }
  return v;
}

}  // namespace ekmix
