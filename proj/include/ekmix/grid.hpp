#pragma once

#include <cstddef>
#include <vector>

namespace ekmix {

/// Uniform cell-centered grid on the periodic interval [0, L); cell i has its
/// center at (i + 1/2) dx.
class Grid1D {
 public:
  Grid1D() = default;
  Grid1D(std::size_t n_cells, double length);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] double dx() const { return length_ / static_cast<double>(n_); }
  [[nodiscard]] double x(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dx(); }
  [[nodiscard]] std::size_t next(std::size_t i) const { return i + 1 == n_ ? 0 : i + 1; }
  [[nodiscard]] std::size_t prev(std::size_t i) const { return i == 0 ? n_ - 1 : i - 1; }

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  std::size_t n_ = 0;
  double length_ = 0.0;
};

using ScalarField = std::vector<double>;

/// Centered (f[i+1] - f[i-1]) / 2dx.
ScalarField grad(const Grid1D& grid, const ScalarField& f);
/// (f[i+1] - 2 f[i] + f[i-1]) / dx^2.
ScalarField laplacian(const Grid1D& grid, const ScalarField& f);
/// F[i] is the flux through the face i+1/2; returns (F[i] - F[i-1]) / dx.
ScalarField div_flux(const Grid1D& grid, const ScalarField& face_flux);
/// Sum of f times dx.
double integrate(const Grid1D& grid, const ScalarField& f);

/// Densities and momenta m_i = rho_i v_i of every species on a shared grid.
struct MixtureState {
  Grid1D grid;
  std::vector<ScalarField> rho;
  std::vector<ScalarField> mom;
  double t = 0.0;

  MixtureState() = default;
  MixtureState(const Grid1D& g, std::size_t species);

  [[nodiscard]] std::size_t species() const { return rho.size(); }

  /// Throws ValidationError on shape mismatch, non-finite values or a
  /// density below `floor`.
  void validate(double floor) const;

  [[nodiscard]] ScalarField velocity(std::size_t s) const;
  [[nodiscard]] ScalarField total_density() const;
  [[nodiscard]] ScalarField total_momentum() const;
  [[nodiscard]] double min_density() const;
};

/// (sum_i m_i) / (sum_i rho_i), cellwise.
ScalarField barycentric_velocity(const MixtureState& state);

}  // namespace ekmix
