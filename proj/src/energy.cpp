#include "ekmix/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ekmix/errors.hpp"

namespace ekmix {

namespace {

void guard(double rho) {
  if (!(rho >= kRhoMin) || !std::isfinite(rho)) {
    throw DomainError("density " + std::to_string(rho) + " below thermodynamic floor");
  }
}

}  // namespace

void EnergyLaw::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("energy law: c must be positive");
  if (h_kind == EnthalpyKind::gamma_law && !(gamma > 1.0)) {
    throw ValidationError("energy law: gamma-law requires gamma > 1");
  }
  if (kappa_kind != CapillarityKind::none && !(k > 0.0)) {
    throw ValidationError("energy law: capillarity coefficient k must be positive");
  }
  if (kappa_kind == CapillarityKind::power && !(s >= -1.0 && s <= 0.0)) {
    throw ValidationError("energy law: power capillarity exponent must lie in [-1, 0]");
  }
}

double EnergyLaw::h(double rho) const {
  switch (h_kind) {
    case EnthalpyKind::quadratic: return c * rho * rho;
    case EnthalpyKind::gamma_law: return c * std::pow(rho, gamma) / (gamma - 1.0);
  }
  return 0.0;
}

double EnergyLaw::dh(double rho) const {
  switch (h_kind) {
    case EnthalpyKind::quadratic: return 2.0 * c * rho;
    case EnthalpyKind::gamma_law: return c * gamma * std::pow(rho, gamma - 1.0) / (gamma - 1.0);
  }
  return 0.0;
}

double EnergyLaw::d2h(double rho) const {
  switch (h_kind) {
    case EnthalpyKind::quadratic: return 2.0 * c;
    case EnthalpyKind::gamma_law: return c * gamma * std::pow(rho, gamma - 2.0);
  }
  return 0.0;
}

double EnergyLaw::kappa(double rho) const {
  switch (kappa_kind) {
    case CapillarityKind::none: return 0.0;
    case CapillarityKind::constant: return k;
    case CapillarityKind::quantum: return k / (4.0 * rho);
    case CapillarityKind::power: return k * std::pow(rho, s);
  }
  return 0.0;
}

double EnergyLaw::dkappa(double rho) const {
  switch (kappa_kind) {
    case CapillarityKind::none:
    case CapillarityKind::constant: return 0.0;
    case CapillarityKind::quantum: return -k / (4.0 * rho * rho);
    case CapillarityKind::power: return k * s * std::pow(rho, s - 1.0);
  }
  return 0.0;
}

double EnergyLaw::d2kappa(double rho) const {
  switch (kappa_kind) {
    case CapillarityKind::none:
    case CapillarityKind::constant: return 0.0;
    case CapillarityKind::quantum: return k / (2.0 * rho * rho * rho);
    case CapillarityKind::power: return k * s * (s - 1.0) * std::pow(rho, s - 2.0);
  }
  return 0.0;
}

EnergyLaw EnergyLaw::quadratic(double c, CapillarityKind kind, double k, double s) {
  EnergyLaw law{EnthalpyKind::quadratic, c, 2.0, kind, k, s};
  law.validate();
  return law;
}

EnergyLaw EnergyLaw::gamma_law(double c, double gamma, CapillarityKind kind, double k, double s) {
  EnergyLaw law{EnthalpyKind::gamma_law, c, gamma, kind, k, s};
  law.validate();
  return law;
}

std::string_view to_string(EnthalpyKind kind) {
  switch (kind) {
    case EnthalpyKind::quadratic: return "quadratic";
    case EnthalpyKind::gamma_law: return "gamma";
  }
  return "?";
}

std::string_view to_string(CapillarityKind kind) {
  switch (kind) {
    case CapillarityKind::none: return "none";
    case CapillarityKind::constant: return "constant";
    case CapillarityKind::quantum: return "quantum";
    case CapillarityKind::power: return "power";
  }
  return "?";
}

EnthalpyKind parse_enthalpy_kind(std::string_view name) {
  if (name == "quadratic") return EnthalpyKind::quadratic;
  if (name == "gamma" || name == "gamma_law") return EnthalpyKind::gamma_law;
  throw ValidationError("unknown enthalpy kind '" + std::string(name) + "'");
}

CapillarityKind parse_capillarity_kind(std::string_view name) {
  if (name == "none") return CapillarityKind::none;
  if (name == "constant") return CapillarityKind::constant;
  if (name == "quantum") return CapillarityKind::quantum;
  if (name == "power") return CapillarityKind::power;
  throw ValidationError("unknown capillarity kind '" + std::string(name) + "'");
}

double pressure(const EnergyLaw& law, double rho) {
  guard(rho);
  // Closed forms avoid the cancellation in rho h' - h.
  switch (law.h_kind) {
    case EnthalpyKind::quadratic: return law.c * rho * rho;
    case EnthalpyKind::gamma_law: return law.c * std::pow(rho, law.gamma);
  }
  return 0.0;
}

double pressure_derivative(const EnergyLaw& law, double rho) {
  guard(rho);
  return rho * law.d2h(rho);
}

double sound_speed(const EnergyLaw& law, double rho) {
  return std::sqrt(pressure_derivative(law, rho));
}

double potential_density(const EnergyLaw& law, double rho, double q) {
  guard(rho);
  return law.h(rho) + 0.5 * law.kappa(rho) * q * q;
}

double chemical_potential(const EnergyLaw& law, const ThermoPoint& pt) {
  guard(pt.rho);
  double mu = law.dh(pt.rho);
  if (law.has_capillarity()) mu += 0.5 * law.dkappa(pt.rho) * pt.q * pt.q - pt.div_kq;
  return mu;
}

double capillary_pressure_coefficient(const EnergyLaw& law, double rho) {
  switch (law.kappa_kind) {
    case CapillarityKind::none:
    case CapillarityKind::quantum: return 0.0;
    case CapillarityKind::constant: return law.k;
    case CapillarityKind::power: return law.k * (1.0 + law.s) * std::pow(rho, law.s);
  }
  return 0.0;
}

StressComponents stress_components(const EnergyLaw& law, const ThermoPoint& pt) {
  const double p = pressure(law, pt.rho);
  if (!law.has_capillarity()) return {p, 0.0, 0.0};
  const double kap = law.kappa(pt.rho);
  const double q2 = pt.q * pt.q;
  return {p + 0.5 * capillary_pressure_coefficient(law, pt.rho) * q2, pt.rho * kap * pt.q, kap * q2};
}

double relative_enthalpy(const EnergyLaw& law, double rho, double rho_hat) {
  guard(rho);
  guard(rho_hat);
  const double d = rho - rho_hat;
  if (law.h_kind == EnthalpyKind::quadratic) return law.c * d * d;
  return law.h(rho) - law.h(rho_hat) - law.dh(rho_hat) * d;
}

double relative_inverse_capillarity(const EnergyLaw& law, double rho, double rho_hat) {
  guard(rho);
  guard(rho_hat);
  switch (law.kappa_kind) {
    case CapillarityKind::none:
    case CapillarityKind::constant:
    case CapillarityKind::quantum:
      // -1/kappa is constant or affine in rho.
      return 0.0;
    case CapillarityKind::power: {
      // g(rho) = -rho^{-s}/k, g'(rho) = s rho^{-s-1}/k
      const double g = -std::pow(rho, -law.s) / law.k;
      const double g_hat = -std::pow(rho_hat, -law.s) / law.k;
      const double dg_hat = law.s * std::pow(rho_hat, -law.s - 1.0) / law.k;
      return g - g_hat - dg_hat * (rho - rho_hat);
    }
  }
  return 0.0;
}

double relative_potential(const EnergyLaw& law, const ThermoPoint& pt, const ThermoPoint& pt_hat) {
  const double rel_h = relative_enthalpy(law, pt.rho, pt_hat.rho);
  if (!law.has_capillarity()) return rel_h;
  const double kap = law.kappa(pt.rho);
  const double kap_hat = law.kappa(pt_hat.rho);
  const double w = kap * pt.q - kap_hat * pt_hat.q;
  return rel_h + w * w / (2.0 * kap) +
         0.5 * kap_hat * kap_hat * pt_hat.q * pt_hat.q *
             relative_inverse_capillarity(law, pt.rho, pt_hat.rho);
}

double a4_discriminant(const EnergyLaw& law, double rho) {
  guard(rho);
  switch (law.kappa_kind) {
    case CapillarityKind::none:
    case CapillarityKind::constant:
    case CapillarityKind::quantum: return 0.0;
    case CapillarityKind::power:
      // k^2 [s(s-1) - 2 s^2] rho^{2s-2} = -k^2 s (s+1) rho^{2s-2}
      return -law.k * law.k * law.s * (law.s + 1.0) * std::pow(rho, 2.0 * law.s - 2.0);
  }
  return 0.0;
}

A4Report check_assumption_A4(const EnergyLaw& law, double rho_lo, double rho_hi,
                             std::size_t samples) {
  if (!(rho_lo > 0.0) || !(rho_hi > rho_lo)) {
    throw PreconditionError("A4 check needs 0 < rho_lo < rho_hi");
  }
  samples = std::max<std::size_t>(samples, 2);
  A4Report report;
  report.rho_lo = rho_lo;
  report.rho_hi = rho_hi;
  report.samples = samples;
  report.min_d2h = std::numeric_limits<double>::infinity();
  report.min_kappa = law.has_capillarity() ? std::numeric_limits<double>::infinity() : 0.0;
  report.min_discriminant = law.has_capillarity() ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double rho =
        rho_lo + (rho_hi - rho_lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
    report.min_d2h = std::min(report.min_d2h, law.d2h(rho));
    if (law.has_capillarity()) {
      report.min_kappa = std::min(report.min_kappa, law.kappa(rho));
      report.min_discriminant = std::min(report.min_discriminant, a4_discriminant(law, rho));
    }
  }
  constexpr double tol = -1e-12;
  report.pass = report.min_d2h >= tol && report.min_kappa >= tol && report.min_discriminant >= tol;
  return report;
}

}  // namespace ekmix
