#include "ekmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ekmix/errors.hpp"
#include "ekmix/friction.hpp"

namespace ekmix {

namespace {

void require_same_grid(const MixtureState& a, const MixtureState& b) {
  if (!(a.grid == b.grid) || a.species() != b.species()) {
    throw PreconditionError("states live on different grids");
  }
}

double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

double potential_energy(const MixtureModel& model, const MixtureState& state) {
  const Grid1D& grid = state.grid;
  double sum = 0.0;
  for (std::size_t s = 0; s < state.species(); ++s) {
    const EnergyLaw& law = model.laws[s];
    const ScalarField& rho = state.rho[s];
    if (law.has_capillarity()) {
      const ScalarField q = grad(grid, rho);
      for (std::size_t i = 0; i < grid.size(); ++i) sum += potential_density(law, rho[i], q[i]);
    } else {
      for (std::size_t i = 0; i < grid.size(); ++i) sum += law.h(rho[i]);
    }
  }
  return sum * grid.dx();
}

double total_energy(const MixtureModel& model, const MixtureState& state) {
  double kinetic = 0.0;
  for (std::size_t s = 0; s < state.species(); ++s) {
    for (std::size_t i = 0; i < state.grid.size(); ++i) {
      kinetic += 0.5 * state.mom[s][i] * state.mom[s][i] / state.rho[s][i];
    }
  }
  return potential_energy(model, state) + kinetic * state.grid.dx();
}

double total_friction_dissipation(const MixtureModel& model, const MixtureState& state) {
  const std::size_t n = state.species();
  if (n < 2) return 0.0;
  const auto ni = static_cast<Eigen::Index>(n);
  Vector rho(ni), v(ni);
  double sum = 0.0;
  for (std::size_t i = 0; i < state.grid.size(); ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      rho(static_cast<Eigen::Index>(s)) = state.rho[s][i];
      v(static_cast<Eigen::Index>(s)) = state.mom[s][i] / state.rho[s][i];
    }
    sum += friction_dissipation(model.b, rho, v);
  }
  return sum * state.grid.dx();
}

double momentum_scale(const MixtureModel& model, const MixtureState& state) {
  double sum = 0.0;
  for (std::size_t s = 0; s < state.species(); ++s) {
    for (std::size_t i = 0; i < state.grid.size(); ++i) {
      sum += std::abs(state.mom[s][i]) +
             state.rho[s][i] * sound_speed(model.laws[s], state.rho[s][i]);
    }
  }
  return sum * state.grid.dx();
}

DiagnosticsRecord make_record(const MixtureModel& model, const MixtureState& state, double dt,
                              double dissipated) {
  DiagnosticsRecord rec;
  rec.t = state.t;
  rec.dt = dt;
  rec.energy = total_energy(model, state);
  rec.masses.reserve(state.species());
  for (const auto& r : state.rho) rec.masses.push_back(integrate(state.grid, r));
  rec.momentum = integrate(state.grid, state.total_momentum());
  rec.friction_dissipation =
      model.eps > 0.0 ? total_friction_dissipation(model, state) / model.eps : 0.0;
  rec.dissipated = dissipated;
  rec.min_rho = state.min_density();
  const ScalarField v = barycentric_velocity(state);
  rec.max_grad_v = max_abs(grad(state.grid, v));
  rec.max_grad_div_v = max_abs(laplacian(state.grid, v));
  return rec;
}

bool ChiValue::weighting_sensitive() const {
  const double scale = std::max(chi, chi_alt);
  return scale > 0.0 && std::abs(chi - chi_alt) > 0.1 * scale;
}

ChiValue chi(const MixtureModel& model, const MixtureState& state, const MixtureState& ref,
             const std::vector<ScalarField>& ref_velocity) {
  require_same_grid(state, ref);
  const Grid1D& grid = state.grid;
  ChiValue out;
  for (std::size_t s = 0; s < state.species(); ++s) {
    const EnergyLaw& law = model.laws[s];
    const ScalarField& rho = state.rho[s];
    const ScalarField& rho_hat = ref.rho[s];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double dv = state.mom[s][i] / rho[i] - ref_velocity[s][i];
      const double dr = rho[i] - rho_hat[i];
      out.kinetic += 0.5 * rho[i] * dv * dv;
      out.density += dr * dr;
    }
    if (law.has_capillarity()) {
      const ScalarField q = grad(grid, rho);
      const ScalarField q_hat = grad(grid, rho_hat);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double kap = law.kappa(rho[i]);
        const double kap_hat = law.kappa(rho_hat[i]);
        const double w = kap * q[i] - kap_hat * q_hat[i];
        out.gradient += w * w / (2.0 * kap);
        out.gradient_alt += w * w / (2.0 * kap_hat);
      }
    }
  }
  const double dx = grid.dx();
  out.kinetic *= dx;
  out.density *= dx;
  out.gradient *= dx;
  out.gradient_alt *= dx;
  out.chi = out.kinetic + out.density + out.gradient;
  out.chi_alt = out.kinetic + out.density + out.gradient_alt;
  return out;
}

ChiValue chi(const MixtureModel& model, const MixtureState& state, const MixtureState& ref) {
  std::vector<ScalarField> vel;
  vel.reserve(ref.species());
  for (std::size_t s = 0; s < ref.species(); ++s) vel.push_back(ref.velocity(s));
  return chi(model, state, ref, vel);
}

double relative_total_energy(const MixtureModel& model, const MixtureState& state,
                             const MixtureState& ref, const std::vector<ScalarField>& ref_velocity) {
  require_same_grid(state, ref);
  const Grid1D& grid = state.grid;
  double sum = 0.0;
  for (std::size_t s = 0; s < state.species(); ++s) {
    const EnergyLaw& law = model.laws[s];
    const ScalarField q = grad(grid, state.rho[s]);
    const ScalarField q_hat = grad(grid, ref.rho[s]);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double rho = state.rho[s][i];
      const double dv = state.mom[s][i] / rho - ref_velocity[s][i];
      sum += relative_potential(law, {rho, q[i], 0.0}, {ref.rho[s][i], q_hat[i], 0.0}) +
             0.5 * rho * dv * dv;
    }
  }
  return sum * grid.dx();
}

double l2_distance(const MixtureState& state, const MixtureState& ref,
                   const std::vector<ScalarField>& ref_velocity) {
  require_same_grid(state, ref);
  double sum = 0.0;
  for (std::size_t s = 0; s < state.species(); ++s) {
    for (std::size_t i = 0; i < state.grid.size(); ++i) {
      const double dr = state.rho[s][i] - ref.rho[s][i];
      const double dv = state.mom[s][i] / state.rho[s][i] - ref_velocity[s][i];
      sum += dr * dr + dv * dv;
    }
  }
  return sum * state.grid.dx();
}

AuditReport energy_audit(const Trajectory& trajectory, double dx, double constant) {
  AuditReport report;
  const auto& recs = trajectory.records;
  if (recs.empty()) {
    report.pass = true;
    return report;
  }
  const double e0 = recs.front().energy;
  double dt_max = 0.0;
  report.max_excess = -std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    const double excess = r.energy + r.dissipated - e0;
    report.max_excess = std::max(report.max_excess, excess);
    report.max_abs_defect = std::max(report.max_abs_defect, std::abs(excess));
    dt_max = std::max(dt_max, r.dt);
  }
  report.final_defect = std::abs(recs.back().energy + recs.back().dissipated - e0);
  const double horizon = recs.back().t - recs.front().t;
  // Rounding in the energy sums themselves is not a discretization defect.
  const double slack = 1e-12 * std::max(1.0, std::abs(e0));
  report.tol = constant * (dx * dx + dt_max) * horizon + slack;
  report.pass = report.max_excess <= report.tol;
  return report;
}

RateFit convergence_rate(const std::vector<RateRow>& rows) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (r.sup_chi > 0.0 && r.eps > 0.0 && std::isfinite(r.sup_chi)) {
      xs.push_back(std::log(r.eps));
      ys.push_back(std::log(r.sup_chi));
    }
  }
  if (xs.size() < 2) throw PreconditionError("rate fit needs at least two rows with chi > 0");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw PreconditionError("rate fit needs distinct eps values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.used = xs.size();
  return fit;
}

StressComponents relative_stresses(const EnergyLaw& law, const ThermoPoint& pt,
                                   const ThermoPoint& pt_hat) {
  const StressComponents g = stress_components(law, pt);
  const StressComponents g_hat = stress_components(law, pt_hat);
  const double rho = pt_hat.rho;
  const double q = pt_hat.q;
  const double dr = pt.rho - rho;
  const double dq = pt.q - q;
  const double dp = pressure_derivative(law, rho);
  if (!law.has_capillarity()) return {g.s - g_hat.s - dp * dr, 0.0, 0.0};

  const double kap = law.kappa(rho);
  const double dkap = law.dkappa(rho);
  const double d2kap = law.d2kappa(rho);
  const double a = capillary_pressure_coefficient(law, rho);
  const double da = 2.0 * dkap + rho * d2kap;

  StressComponents out;
  out.s = g.s - g_hat.s - (dp + 0.5 * da * q * q) * dr - a * q * dq;
  out.r = g.r - g_hat.r - a * q * dr - rho * kap * dq;
  out.H = g.H - g_hat.H - dkap * q * q * dr - 2.0 * kap * q * dq;
  return out;
}

}  // namespace ekmix
