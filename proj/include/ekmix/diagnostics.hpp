#pragma once

#include <cstddef>
#include <vector>

#include "ekmix/energy.hpp"
#include "ekmix/grid.hpp"
#include "ekmix/model.hpp"

namespace ekmix {

/// Per-step scalars emitted by the integrators.
struct DiagnosticsRecord {
  double t = 0.0;
  double dt = 0.0;
  double energy = 0.0;                ///< total energy
  std::vector<double> masses;         ///< integral of each rho_i
  double momentum = 0.0;              ///< integral of sum_i m_i
  double friction_dissipation = 0.0;  ///< (1/eps) * integral of the friction dissipation density
  double dissipated = 0.0;            ///< friction dissipation accumulated up to t
  double min_rho = 0.0;
  double max_grad_v = 0.0;            ///< max |d_x v| of the barycentric velocity
  double max_grad_div_v = 0.0;        ///< max |d_xx v|
};

struct Trajectory {
  std::vector<MixtureState> snapshots;
  std::vector<DiagnosticsRecord> records;  ///< records[0] is the initial state
};

/// Gradient part plus enthalpy: sum dx [h_i + 1/2 kappa_i |grad rho_i|^2].
double potential_energy(const MixtureModel& model, const MixtureState& state);
/// potential_energy plus sum dx 1/2 m_i^2 / rho_i.
double total_energy(const MixtureModel& model, const MixtureState& state);
/// Integral of 1/2 sum_ij b_ij rho_i rho_j (v_i - v_j)^2 (no 1/eps factor).
double total_friction_dissipation(const MixtureModel& model, const MixtureState& state);
/// Integral of sum_i (|m_i| + rho_i c_i); the scale for momentum conservation checks.
double momentum_scale(const MixtureModel& model, const MixtureState& state);

DiagnosticsRecord make_record(const MixtureModel& model, const MixtureState& state, double dt,
                              double dissipated);

/// Kinetic, density and weighted-gradient parts of chi. `chi` weights the
/// gradient term by 1/kappa(rho) of `state`; `chi_alt` uses kappa(rho_ref).
struct ChiValue {
  double chi = 0.0;
  double chi_alt = 0.0;
  double kinetic = 0.0;
  double density = 0.0;
  double gradient = 0.0;
  double gradient_alt = 0.0;
  /// The two weightings differ by more than 10% of chi.
  [[nodiscard]] bool weighting_sensitive() const;
};

/// chi between `state` (velocities m_i / rho_i) and a reference with densities
/// `ref.rho` and species velocities `ref_velocity`.
ChiValue chi(const MixtureModel& model, const MixtureState& state, const MixtureState& ref,
             const std::vector<ScalarField>& ref_velocity);

/// Reference velocities taken directly from ref.mom / ref.rho.
ChiValue chi(const MixtureModel& model, const MixtureState& state, const MixtureState& ref);

/// sum dx [relative potential + 1/2 rho_i |v_i - v_ref_i|^2].
double relative_total_energy(const MixtureModel& model, const MixtureState& state,
                             const MixtureState& ref, const std::vector<ScalarField>& ref_velocity);

/// sum dx [(rho_i - rho_ref_i)^2 + (v_i - v_ref_i)^2].
double l2_distance(const MixtureState& state, const MixtureState& ref,
                   const std::vector<ScalarField>& ref_velocity);

struct AuditReport {
  double max_excess = 0.0;    ///< max_t E(t) + dissipated(t) - E(0), signed
  double final_defect = 0.0;  ///< |E(T) + dissipated(T) - E(0)|
  double max_abs_defect = 0.0;
  double tol = 0.0;
  bool pass = false;
};

/// Passes iff max_excess <= C (dx^2 + dt_max) T (plus rounding slack).
AuditReport energy_audit(const Trajectory& trajectory, double dx, double constant = 1.0);

struct RateRow {
  double eps = 0.0;
  double sup_chi = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t used = 0;
};

/// Least-squares slope of log sup_chi against log eps; rows with sup_chi <= 0
/// are dropped. Throws PreconditionError with fewer than two usable rows.
RateFit convergence_rate(const std::vector<RateRow>& rows);

/// Second-order Taylor remainders g(rho,q) - g(rho^,q^) - g_rho(rho^,q^)(rho - rho^)
/// - g_q(rho^,q^)(q - q^) for each of s, r and H.
StressComponents relative_stresses(const EnergyLaw& law, const ThermoPoint& pt,
                                   const ThermoPoint& pt_hat);

}  // namespace ekmix
