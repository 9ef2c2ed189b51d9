#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "ekmix/diagnostics.hpp"
#include "ekmix/grid.hpp"
#include "ekmix/model.hpp"

namespace ekmix {

enum class FrictionMode { implicit_exact, explicit_euler };

std::string_view to_string(FrictionMode mode);
FrictionMode parse_friction_mode(std::string_view name);

struct SolverParams {
  double cfl = 0.4;
  double t_end = 0.1;
  double rho_floor = 1e-6;
  FrictionMode friction_mode = FrictionMode::implicit_exact;
  double parabolic_safety = 0.25;
  std::size_t snapshots = 10;  ///< equally spaced output times after t = 0
  /// Chapman-Enskog only: drop transport and keep the barycentric velocity at
  /// zero, leaving pure cross-diffusion.
  bool frozen_velocity = false;

  void validate() const;
  friend bool operator==(const SolverParams&, const SolverParams&) = default;
};

/// Time derivative of (rho_i, m_i) from transport and capillarity, without friction.
struct Increment {
  std::vector<ScalarField> rho;
  std::vector<ScalarField> mom;
};

/// Per-species Rusanov transport with the Korteweg stress of each species.
Increment rhs_transport_capillary(const MixtureModel& model, const MixtureState& state);

/// Mixture transport: every rho_i moves with the barycentric velocity and a
/// single momentum carries the summed stress. The returned momentum increment
/// is the total one, stored in mom[0] (other entries are zero).
Increment rhs_mixture(const MixtureModel& model, const MixtureState& state);

/// Backward-Euler friction at frozen densities, solved exactly per cell.
/// If `dissipated` is given, adds (dt/eps) * integral of the dissipation at
/// the new velocities.
MixtureState implicit_friction_step(const MixtureModel& model, const MixtureState& state,
                                    double dt, double* dissipated = nullptr);

/// Forward-Euler friction; only stable for small dt/eps.
MixtureState explicit_friction_step(const MixtureModel& model, const MixtureState& state,
                                    double dt, double* dissipated = nullptr);

/// Chemical potential field mu_i = h' + 1/2 kappa' q^2 - G(kappa G rho) with
/// G the centered difference.
ScalarField chemical_potential_field(const EnergyLaw& law, const Grid1D& grid,
                                     const ScalarField& rho);

/// Cellwise rho_i u_i = -eps D(rho) G(mu); sums to zero over species.
std::vector<ScalarField> diffusion_fluxes(const MixtureModel& model, const Grid1D& grid,
                                          const std::vector<ScalarField>& rho);

/// Species velocities the given system associates with a state:
/// relaxation m_i / rho_i, limit the barycentric v, Chapman-Enskog v + u_i.
std::vector<ScalarField> reference_velocities(const MixtureModel& model, const MixtureState& state,
                                              SystemKind kind);

struct StepResult {
  MixtureState state;
  double dt = 0.0;
  double dissipated = 0.0;
};

/// Largest stable step for the given system (before retries).
double stable_dt(const MixtureModel& model, const MixtureState& state, const SolverParams& params,
                 SystemKind kind);

/// Strang splitting: half friction, SSP-RK3 transport, half friction.
StepResult step_relaxation(const MixtureModel& model, const MixtureState& state,
                           const SolverParams& params,
                           double dt_cap = std::numeric_limits<double>::infinity());
/// SSP-RK3 mixture transport followed by a linearly implicit diffusion step.
StepResult step_chapman_enskog(const MixtureModel& model, const MixtureState& state,
                               const SolverParams& params,
                               double dt_cap = std::numeric_limits<double>::infinity());
StepResult step_limit(const MixtureModel& model, const MixtureState& state,
                      const SolverParams& params,
                      double dt_cap = std::numeric_limits<double>::infinity());

/// Reusable stepping workspace. Keeps the sparse factorization of the
/// diffusion step between calls.
class Stepper {
 public:
  Stepper(const MixtureModel& model, const SolverParams& params, SystemKind kind);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  /// Advances `state` in place by at most dt_cap; halves dt on floor
  /// violations up to 10 times. Returns dt used and the friction dissipation.
  StepResult step(const MixtureState& state, double dt_cap);

  struct Impl;
  Impl& impl() { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// Integrates to params.t_end. Snapshots land exactly on
/// k * t_end / params.snapshots; one record is produced per step.
Trajectory run(const MixtureModel& model, const MixtureState& init, const SolverParams& params,
               SystemKind kind);

struct InitSpec {
  std::vector<double> base;       ///< mean density per species
  std::vector<double> amplitude;  ///< relative perturbation per species
  std::vector<int> mode;          ///< Fourier mode per species
  std::vector<double> phase;      ///< phase per species (radians)
  double velocity_amplitude = 0.0;
  int velocity_mode = 1;
  int order = 0;  ///< 0: all v_i = v, 1: v_i = v + u_i
  std::uint64_t seed = 0;
  bool random_phases = false;

  friend bool operator==(const InitSpec&, const InitSpec&) = default;
};

/// rho_i = base_i (1 + a_i sin(2 pi k_i x / L + phase_i)), v = A sin(2 pi k x / L),
/// and species velocities according to spec.order.
MixtureState well_prepared_init(const MixtureModel& model, const Grid1D& grid,
                                const InitSpec& spec, double rho_floor = 1e-6);

/// The state the reference system starts from: same densities, every species
/// moving with the barycentric velocity.
MixtureState mixture_projection(const MixtureState& state);

}  // namespace ekmix
