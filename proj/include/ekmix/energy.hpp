#pragma once

// Pointwise thermodynamics of one species with potential energy density
//
//   F(rho, q) = h(rho) + 1/2 kappa(rho) |q|^2,   q = grad rho.
//
// All functions here are pure and grid-agnostic: anything that needs a
// derivative of a field (q, div(kappa grad rho)) takes it as an argument.

#include <cstddef>
#include <string>
#include <string_view>

namespace ekmix {

/// Thermodynamic layer guard; callers must keep densities above this.
inline constexpr double kRhoMin = 1e-8;

enum class EnthalpyKind { quadratic, gamma_law };
enum class CapillarityKind { none, constant, quantum, power };

/// Energy law of one species.
///
/// h:     quadratic  c rho^2
///        gamma_law  c rho^gamma / (gamma - 1), gamma > 1
/// kappa: none       0
///        constant   k
///        quantum    k / (4 rho)
///        power      k rho^s,  s in [-1, 0]
struct EnergyLaw {
  EnthalpyKind h_kind = EnthalpyKind::quadratic;
  double c = 1.0;
  double gamma = 2.0;
  CapillarityKind kappa_kind = CapillarityKind::none;
  double k = 0.0;
  double s = 0.0;

  /// Throws ValidationError if the parameters violate the catalog's invariants.
  void validate() const;

  [[nodiscard]] bool has_capillarity() const { return kappa_kind != CapillarityKind::none; }

  [[nodiscard]] double h(double rho) const;
  [[nodiscard]] double dh(double rho) const;
  [[nodiscard]] double d2h(double rho) const;

  [[nodiscard]] double kappa(double rho) const;
  [[nodiscard]] double dkappa(double rho) const;
  [[nodiscard]] double d2kappa(double rho) const;

  static EnergyLaw quadratic(double c, CapillarityKind kind = CapillarityKind::none, double k = 0.0,
                             double s = 0.0);
  static EnergyLaw gamma_law(double c, double gamma, CapillarityKind kind = CapillarityKind::none,
                             double k = 0.0, double s = 0.0);

  friend bool operator==(const EnergyLaw&, const EnergyLaw&) = default;
};

std::string_view to_string(EnthalpyKind kind);
std::string_view to_string(CapillarityKind kind);
EnthalpyKind parse_enthalpy_kind(std::string_view name);
CapillarityKind parse_capillarity_kind(std::string_view name);

struct ThermoPoint {
  double rho = 1.0;
  double q = 0.0;       ///< density gradient
  double div_kq = 0.0;  ///< div(kappa(rho) grad rho) at the point
};

struct StressComponents {
  double s = 0.0;  ///< isotropic part
  double r = 0.0;  ///< vector whose divergence enters the isotropic part
  double H = 0.0;  ///< anisotropic part, kappa q (x) q (scalar in 1D)
};

/// p = rho h'(rho) - h(rho).
double pressure(const EnergyLaw& law, double rho);
/// dp/drho = rho h''(rho).
double pressure_derivative(const EnergyLaw& law, double rho);
double sound_speed(const EnergyLaw& law, double rho);

/// F(rho, q).
double potential_density(const EnergyLaw& law, double rho, double q);

/// mu = h'(rho) + 1/2 kappa'(rho) q^2 - div(kappa grad rho).
double chemical_potential(const EnergyLaw& law, const ThermoPoint& pt);

/// kappa + rho kappa', in closed form (exactly zero for the quantum law).
double capillary_pressure_coefficient(const EnergyLaw& law, double rho);

/// (s, r, H) with s = p + 1/2 (kappa + rho kappa') q^2, r = rho kappa q, H = kappa q^2.
StressComponents stress_components(const EnergyLaw& law, const ThermoPoint& pt);

/// Bregman remainder h(rho) - h(rho_hat) - h'(rho_hat)(rho - rho_hat).
double relative_enthalpy(const EnergyLaw& law, double rho, double rho_hat);

/// Bregman remainder of -1/kappa, evaluated in closed form per capillarity kind.
double relative_inverse_capillarity(const EnergyLaw& law, double rho, double rho_hat);

/// Relative potential energy density F(rho, q | rho_hat, q_hat) via the
/// weighted-gradient splitting
///   h(rho|rho_hat) + |kappa q - kappa_hat q_hat|^2 / (2 kappa)
///     + kappa_hat^2 q_hat^2 / 2 * (-1/kappa)(rho|rho_hat).
double relative_potential(const EnergyLaw& law, const ThermoPoint& pt, const ThermoPoint& pt_hat);

/// kappa kappa'' - 2 kappa'^2, in closed form (exactly zero for constant and quantum laws).
double a4_discriminant(const EnergyLaw& law, double rho);

struct A4Report {
  double rho_lo = 0.0;
  double rho_hi = 0.0;
  std::size_t samples = 0;
  double min_d2h = 0.0;
  double min_kappa = 0.0;           ///< 0 when the law has no capillarity
  double min_discriminant = 0.0;    ///< 0 when the law has no capillarity
  bool pass = false;
};

/// Samples [rho_lo, rho_hi] and checks h'' >= 0, kappa > 0 and
/// kappa kappa'' - 2 kappa'^2 >= 0 (each to -1e-12).
A4Report check_assumption_A4(const EnergyLaw& law, double rho_lo, double rho_hi,
                             std::size_t samples = 1001);

}  // namespace ekmix
