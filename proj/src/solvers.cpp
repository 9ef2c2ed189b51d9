#include "ekmix/solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/LU>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "ekmix/errors.hpp"
#include "ekmix/friction.hpp"

namespace ekmix {

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::relaxation: return "relaxation";
    case SystemKind::chapman_enskog: return "chapman_enskog";
    case SystemKind::limit: return "limit";
  }
  return "?";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "relaxation") return SystemKind::relaxation;
  if (name == "chapman_enskog" || name == "ce") return SystemKind::chapman_enskog;
  if (name == "limit") return SystemKind::limit;
  throw ValidationError("unknown system '" + std::string(name) + "'");
}

std::string_view to_string(FrictionMode mode) {
  switch (mode) {
    case FrictionMode::implicit_exact: return "implicit_exact";
    case FrictionMode::explicit_euler: return "explicit";
  }
  return "?";
}

FrictionMode parse_friction_mode(std::string_view name) {
  if (name == "implicit_exact" || name == "implicit") return FrictionMode::implicit_exact;
  if (name == "explicit" || name == "explicit_euler") return FrictionMode::explicit_euler;
  throw ValidationError("unknown friction mode '" + std::string(name) + "'");
}

void SolverParams::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("cfl must lie in (0, 1]");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ValidationError("t_end must be nonnegative");
  if (!(rho_floor >= kRhoMin)) throw ValidationError("rho_floor must be at least 1e-8");
  if (!(parabolic_safety > 0.0)) throw ValidationError("parabolic_safety must be positive");
  if (snapshots < 1) throw ValidationError("snapshots must be at least 1");
}

namespace {

constexpr double kMinDt = 1e-12;
constexpr int kMaxRetries = 10;

struct RejectStep {};

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Friction on raw species arrays. Returns the integral of the accounted
// dissipation times dt / eps.
double friction_cells(const MixtureModel& model, std::size_t cells, double dx,
                      const std::vector<const double*>& rho, const std::vector<double*>& mom,
                      double dt, FrictionMode mode) {
  const std::size_t n = rho.size();
  if (n < 2 || dt <= 0.0) return 0.0;
  const auto ni = static_cast<Eigen::Index>(n);
  const double ratio = dt / model.eps;
  double diss = 0.0;
  Vector r(ni), m(ni), v(ni);
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      r(static_cast<Eigen::Index>(s)) = rho[s][i];
      m(static_cast<Eigen::Index>(s)) = mom[s][i];
    }
    const Matrix tau = build_tau(model.b, r);
    Vector m_new(ni);
    if (mode == FrictionMode::implicit_exact) {
      Matrix a = ratio * tau;
      a.diagonal() += r;
      v = Eigen::PartialPivLU<Matrix>(a).solve(m);
      m_new = m - ratio * (tau * v);
    } else {
      v = m.cwiseQuotient(r);
      m_new = m - ratio * (tau * v);
    }
    diss += ratio * v.dot(tau * v);
    // Friction exchanges momentum; close the last species so the cell total is unchanged.
    double total = m.sum();
    for (std::size_t s = 0; s + 1 < n; ++s) {
      mom[s][i] = m_new(static_cast<Eigen::Index>(s));
      total -= m_new(static_cast<Eigen::Index>(s));
    }
    mom[n - 1][i] = total;
  }
  return diss * dx;
}

// Jacobian of mu = h'(rho) + 1/2 kappa'(rho) q^2 - G(kappa(rho) q), q = G rho,
// for one species as a 5-point band: band[5 i + o + 2] couples cell i to i + o.
void mu_jacobian_band(const EnergyLaw& law, const Grid1D& grid, const double* rho,
                      std::vector<double>& band) {
  const std::size_t n = grid.size();
  band.assign(5 * n, 0.0);
  if (!law.has_capillarity()) {
    for (std::size_t i = 0; i < n; ++i) band[5 * i + 2] = law.d2h(rho[i]);
    return;
  }
  const double g = 0.5 / grid.dx();
  const double g2 = g * g;
  std::vector<double> kap(n), dkq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (rho[grid.next(i)] - rho[grid.prev(i)]) * g;
    kap[i] = law.kappa(rho[i]);
    dkq[i] = law.dkappa(rho[i]) * q;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ip = grid.next(i), im = grid.prev(i);
    const double q = (rho[ip] - rho[im]) * g;
    double* row = band.data() + 5 * i;
    // h'' + 1/2 kappa'' q^2, then kappa' q G(delta) - G(kappa' q delta) - G(kappa G delta)
    row[2] = law.d2h(rho[i]) + 0.5 * law.d2kappa(rho[i]) * q * q + (kap[ip] + kap[im]) * g2;
    row[3] = (dkq[i] - dkq[ip]) * g;
    row[1] = (dkq[im] - dkq[i]) * g;
    row[4] = -kap[ip] * g2;
    row[0] = -kap[im] * g2;
  }
}

}  // namespace

ScalarField chemical_potential_field(const EnergyLaw& law, const Grid1D& grid,
                                     const ScalarField& rho) {
  const std::size_t n = grid.size();
  ScalarField mu(n);
  if (!law.has_capillarity()) {
    for (std::size_t i = 0; i < n; ++i) mu[i] = law.dh(rho[i]);
    return mu;
  }
  const ScalarField q = grad(grid, rho);
  ScalarField kq(n);
  for (std::size_t i = 0; i < n; ++i) kq[i] = law.kappa(rho[i]) * q[i];
  const ScalarField div = grad(grid, kq);
  for (std::size_t i = 0; i < n; ++i) mu[i] = chemical_potential(law, {rho[i], q[i], div[i]});
  return mu;
}

std::vector<ScalarField> diffusion_fluxes(const MixtureModel& model, const Grid1D& grid,
                                          const std::vector<ScalarField>& rho) {
  const std::size_t n = rho.size();
  std::vector<ScalarField> flux(n, ScalarField(grid.size(), 0.0));
  if (n < 2 || model.eps == 0.0) return flux;
  std::vector<ScalarField> gmu;
  gmu.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    gmu.push_back(grad(grid, chemical_potential_field(model.laws[s], grid, rho[s])));
  }
  const auto ni = static_cast<Eigen::Index>(n);
  Vector r(ni), g(ni);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t s = 0; s < n; ++s) {
      r(static_cast<Eigen::Index>(s)) = rho[s][i];
      g(static_cast<Eigen::Index>(s)) = gmu[s][i];
    }
    const Vector f = relative_velocity_flux(reduced_operators(model.b, r), model.eps, g);
    for (std::size_t s = 0; s < n; ++s) flux[s][i] = f(static_cast<Eigen::Index>(s));
  }
  return flux;
}

std::vector<ScalarField> reference_velocities(const MixtureModel& model, const MixtureState& state,
                                              SystemKind kind) {
  const std::size_t n = state.species();
  std::vector<ScalarField> vel;
  vel.reserve(n);
  if (kind == SystemKind::relaxation) {
    for (std::size_t s = 0; s < n; ++s) vel.push_back(state.velocity(s));
    return vel;
  }
  const ScalarField v = barycentric_velocity(state);
  vel.assign(n, v);
  if (kind == SystemKind::chapman_enskog) {
    const auto flux = diffusion_fluxes(model, state.grid, state.rho);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < v.size(); ++i) vel[s][i] += flux[s][i] / state.rho[s][i];
    }
  }
  return vel;
}

MixtureState implicit_friction_step(const MixtureModel& model, const MixtureState& state,
                                    double dt, double* dissipated) {
  MixtureState out = state;
  std::vector<const double*> rho;
  std::vector<double*> mom;
  for (std::size_t s = 0; s < out.species(); ++s) {
    rho.push_back(out.rho[s].data());
    mom.push_back(out.mom[s].data());
  }
  const double d = friction_cells(model, out.grid.size(), out.grid.dx(), rho, mom, dt,
                                  FrictionMode::implicit_exact);
  if (dissipated) *dissipated += d;
  return out;
}

MixtureState explicit_friction_step(const MixtureModel& model, const MixtureState& state,
                                    double dt, double* dissipated) {
  MixtureState out = state;
  std::vector<const double*> rho;
  std::vector<double*> mom;
  for (std::size_t s = 0; s < out.species(); ++s) {
    rho.push_back(out.rho[s].data());
    mom.push_back(out.mom[s].data());
  }
  const double d = friction_cells(model, out.grid.size(), out.grid.dx(), rho, mom, dt,
                                  FrictionMode::explicit_euler);
  if (dissipated) *dissipated += d;
  return out;
}

// ---------------------------------------------------------------------------

struct Stepper::Impl {
  MixtureModel model;
  SolverParams params;
  SystemKind kind;
  Grid1D grid;
  std::size_t n = 0;
  std::size_t cells = 0;
  bool mixture = false;
  std::size_t nvar = 0;

  std::vector<double> u0, u1, u2, du;
  std::vector<ScalarField> stress;  // p - S_cap per species
  std::vector<ScalarField> snd;
  std::vector<ScalarField> fr;      // face fluxes
  ScalarField q, r, speed, fm;

  // diffusion
  Eigen::SimplicialLDLT<SpMat> ldlt;
  Eigen::SparseLU<SpMat> lu;
  Eigen::Index analyzed_nnz = -1;
  bool use_lu = false;
  std::vector<Matrix> d_face;
  std::vector<ScalarField> mu, mu_new;
  std::vector<std::vector<double>> jband;
  std::vector<Triplet> triplets;
  SpMat system;

  Impl(const MixtureModel& m, const SolverParams& p, SystemKind k)
      : model(m), params(p), kind(k) {
    n = model.species();
    mixture = kind != SystemKind::relaxation;
  }

  [[nodiscard]] bool diffusive() const {
    return kind == SystemKind::chapman_enskog && model.eps > 0.0 && n > 1;
  }
  [[nodiscard]] bool frozen() const {
    return kind == SystemKind::chapman_enskog && params.frozen_velocity;
  }

  void ensure(const Grid1D& g) {
    if (cells == g.size() && grid == g) return;
    grid = g;
    cells = g.size();
    nvar = mixture ? n + 1 : 2 * n;
    u0.assign(nvar * cells, 0.0);
    u1 = u0;
    u2 = u0;
    du = u0;
    stress.assign(n, ScalarField(cells, 0.0));
    snd.assign(n, ScalarField(cells, 0.0));
    fr.assign(mixture ? n + 1 : 2 * n, ScalarField(cells, 0.0));
    q.assign(cells, 0.0);
    r.assign(cells, 0.0);
    speed.assign(cells, 0.0);
    fm.assign(cells, 0.0);
    analyzed_nnz = -1;
    if (diffusive()) build_face_operators();
  }

  void build_face_operators() {
    d_face.assign(cells, Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    mu.assign(n, ScalarField(cells, 0.0));
    mu_new = mu;
    jband.assign(n, {});
  }

  // Variables: rho_s at s*cells; momenta at (n + s)*cells (relaxation) or the
  // single total momentum at n*cells (mixture).
  double* rho_ptr(std::vector<double>& u, std::size_t s) { return u.data() + s * cells; }
  double* mom_ptr(std::vector<double>& u, std::size_t s) { return u.data() + (n + s) * cells; }

  void load(const MixtureState& state) {
    ensure(state.grid);
    for (std::size_t s = 0; s < n; ++s) std::copy(state.rho[s].begin(), state.rho[s].end(), rho_ptr(u0, s));
    if (!mixture) {
      for (std::size_t s = 0; s < n; ++s) std::copy(state.mom[s].begin(), state.mom[s].end(), mom_ptr(u0, s));
      return;
    }
    double* m = mom_ptr(u0, 0);
    std::fill(m, m + cells, 0.0);
    if (frozen()) return;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < cells; ++i) m[i] += state.mom[s][i];
    }
  }

  void store(std::vector<double>& u, MixtureState& state) {
    for (std::size_t s = 0; s < n; ++s) std::copy(rho_ptr(u, s), rho_ptr(u, s) + cells, state.rho[s].begin());
    if (!mixture) {
      for (std::size_t s = 0; s < n; ++s) std::copy(mom_ptr(u, s), mom_ptr(u, s) + cells, state.mom[s].begin());
      return;
    }
    const double* m = mom_ptr(u, 0);
    for (std::size_t i = 0; i < cells; ++i) {
      double total = 0.0;
      for (std::size_t s = 0; s < n; ++s) total += u[s * cells + i];
      for (std::size_t s = 0; s < n; ++s) state.mom[s][i] = u[s * cells + i] / total * m[i];
    }
  }

  void check_floor(const std::vector<double>& u) const {
    for (std::size_t k = 0; k < n * cells; ++k) {
      if (!(u[k] >= params.rho_floor) || !std::isfinite(u[k])) throw RejectStep{};
    }
    for (std::size_t k = n * cells; k < u.size(); ++k) {
      if (!std::isfinite(u[k])) throw RejectStep{};
    }
  }

  // p - S_cap and sound speed of species s from the density array.
  void species_stress(std::size_t s, const double* rho) {
    const EnergyLaw& law = model.laws[s];
    ScalarField& pi = stress[s];
    ScalarField& c = snd[s];
    for (std::size_t i = 0; i < cells; ++i) {
      pi[i] = pressure(law, rho[i]);
      c[i] = std::sqrt(pressure_derivative(law, rho[i]));
    }
    if (!law.has_capillarity()) return;
    const double g = 0.5 / grid.dx();
    for (std::size_t i = 0; i < cells; ++i) {
      q[i] = (rho[grid.next(i)] - rho[grid.prev(i)]) * g;
      r[i] = rho[i] * law.kappa(rho[i]) * q[i];
    }
    for (std::size_t i = 0; i < cells; ++i) {
      const double kap = law.kappa(rho[i]);
      const double a = capillary_pressure_coefficient(law, rho[i]);
      const double q2 = q[i] * q[i];
      const double s_cap = -0.5 * a * q2 + (r[grid.next(i)] - r[grid.prev(i)]) * g - kap * q2;
      pi[i] -= s_cap;
    }
  }

  void rhs(std::vector<double>& u, std::vector<double>& out) {
    for (std::size_t s = 0; s < n; ++s) species_stress(s, rho_ptr(u, s));
    const double inv = 1.0 / grid.dx();
    if (!mixture) {
      for (std::size_t i = 0; i < cells; ++i) {
        double vmax = 0.0, cmax = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          vmax = std::max(vmax, std::abs(u[(n + s) * cells + i] / u[s * cells + i]));
          cmax = std::max(cmax, snd[s][i]);
        }
        speed[i] = vmax + cmax;
      }
      for (std::size_t s = 0; s < n; ++s) {
        const double* rho = rho_ptr(u, s);
        const double* m = mom_ptr(u, s);
        ScalarField& f_rho = fr[s];
        ScalarField& f_mom = fr[n + s];
        const ScalarField& pi = stress[s];
        for (std::size_t i = 0; i < cells; ++i) {
          const std::size_t j = grid.next(i);
          const double lam = std::max(speed[i], speed[j]);
          const double mfl = m[i] * m[i] / rho[i] + pi[i];
          const double mfr = m[j] * m[j] / rho[j] + pi[j];
          f_rho[i] = 0.5 * (m[i] + m[j]) - 0.5 * lam * (rho[j] - rho[i]);
          f_mom[i] = 0.5 * (mfl + mfr) - 0.5 * lam * (m[j] - m[i]);
        }
      }
    } else {
      const double* m = mom_ptr(u, 0);
      // speed holds the barycentric velocity first
      for (std::size_t i = 0; i < cells; ++i) {
        double total = 0.0, cmax = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          total += u[s * cells + i];
          cmax = std::max(cmax, snd[s][i]);
        }
        fm[i] = m[i] / total;
        speed[i] = std::abs(fm[i]) + cmax;
      }
      const ScalarField& v = fm;
      for (std::size_t s = 0; s < n; ++s) {
        const double* rho = rho_ptr(u, s);
        ScalarField& f_rho = fr[s];
        for (std::size_t i = 0; i < cells; ++i) {
          const std::size_t j = grid.next(i);
          const double lam = std::max(speed[i], speed[j]);
          f_rho[i] = 0.5 * (rho[i] * v[i] + rho[j] * v[j]) - 0.5 * lam * (rho[j] - rho[i]);
        }
      }
      ScalarField& f_mom = fr[n];
      for (std::size_t i = 0; i < cells; ++i) {
        const std::size_t j = grid.next(i);
        const double lam = std::max(speed[i], speed[j]);
        double pl = 0.0, pr = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          pl += stress[s][i];
          pr += stress[s][j];
        }
        f_mom[i] = 0.5 * (m[i] * v[i] + pl + m[j] * v[j] + pr) - 0.5 * lam * (m[j] - m[i]);
      }
    }
    const std::size_t blocks = mixture ? n + 1 : 2 * n;
    for (std::size_t b = 0; b < blocks; ++b) {
      const ScalarField& f = fr[b];
      double* o = out.data() + b * cells;
      for (std::size_t i = 0; i < cells; ++i) o[i] = -(f[i] - f[grid.prev(i)]) * inv;
    }
  }

  // Shu-Osher SSP-RK3 from u0 into u0.
  void rk3(double dt) {
    const std::size_t total = u0.size();
    rhs(u0, du);
    for (std::size_t k = 0; k < total; ++k) u1[k] = u0[k] + dt * du[k];
    check_floor(u1);
    rhs(u1, du);
    for (std::size_t k = 0; k < total; ++k) u2[k] = 0.75 * u0[k] + 0.25 * (u1[k] + dt * du[k]);
    check_floor(u2);
    rhs(u2, du);
    for (std::size_t k = 0; k < total; ++k) {
      u0[k] = u0[k] / 3.0 + 2.0 / 3.0 * (u2[k] + dt * du[k]);
    }
    check_floor(u0);
  }

  double friction(double dt) {
    std::vector<const double*> rho;
    std::vector<double*> mom;
    for (std::size_t s = 0; s < n; ++s) {
      rho.push_back(rho_ptr(u0, s));
      mom.push_back(mom_ptr(u0, s));
    }
    return friction_cells(model, cells, grid.dx(), rho, mom, dt, params.friction_mode);
  }

  [[nodiscard]] std::size_t wrap(std::ptrdiff_t i) const {
    const auto m = static_cast<std::ptrdiff_t>(cells);
    return static_cast<std::size_t>(((i % m) + m) % m);
  }

  // Linearly implicit cross-diffusion on the densities in u0.
  //
  // With P = grad^T D grad (face gradients, D frozen at face densities) and J
  // the Jacobian of mu, the step solves (I + dt eps P J) delta = -dt eps P mu.
  // Multiplying by the symmetric J gives (J + dt eps J P J) delta = -dt eps J P mu,
  // assembled here from band stencils.
  void diffuse(double dt) {
    const auto ni = static_cast<Eigen::Index>(n);
    const auto size = static_cast<Eigen::Index>(n * cells);
    const double eps = model.eps;
    const double inv = 1.0 / grid.dx();
    const double inv2 = inv * inv;

    for (std::size_t s = 0; s < n; ++s) {
      const double* rho = rho_ptr(u0, s);
      ScalarField field(rho, rho + cells);
      mu[s] = chemical_potential_field(model.laws[s], grid, field);
      mu_jacobian_band(model.laws[s], grid, rho, jband[s]);
    }
    Vector rf(ni);
    for (std::size_t i = 0; i < cells; ++i) {
      const std::size_t j = grid.next(i);
      for (std::size_t s = 0; s < n; ++s) {
        rf(static_cast<Eigen::Index>(s)) = 0.5 * (u0[s * cells + i] + u0[s * cells + j]);
      }
      d_face[i] = diffusion_matrix(model.b, rf);
    }

    // P(s,i; r,i+o) for o in -1..1
    auto p_entry = [&](std::size_t s, std::size_t r, std::size_t i, int o) {
      const auto es = static_cast<Eigen::Index>(s), er = static_cast<Eigen::Index>(r);
      const double dm = d_face[grid.prev(i)](es, er);
      const double dp = d_face[i](es, er);
      if (o == -1) return -dm * inv2;
      if (o == 1) return -dp * inv2;
      return (dm + dp) * inv2;
    };

    triplets.clear();
    Eigen::VectorXd rhs_vec = Eigen::VectorXd::Zero(size);
    std::array<double, 7> jp{};
    std::array<double, 11> jpj{};
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < cells; ++i) {
        const auto row = static_cast<int>(s * cells + i);
        const double* js = jband[s].data() + 5 * i;
        for (int o = -2; o <= 2; ++o) {
          triplets.emplace_back(row, static_cast<int>(s * cells + wrap(static_cast<std::ptrdiff_t>(i) + o)),
                                js[o + 2]);
        }
        for (std::size_t r = 0; r < n; ++r) {
          jp.fill(0.0);
          for (int a = -2; a <= 2; ++a) {
            const std::size_t k = wrap(static_cast<std::ptrdiff_t>(i) + a);
            for (int o = -1; o <= 1; ++o) jp[static_cast<std::size_t>(a + o + 3)] += js[a + 2] * p_entry(s, r, k, o);
          }
          jpj.fill(0.0);
          double jp_mu = 0.0;
          for (int c = -3; c <= 3; ++c) {
            const std::size_t k = wrap(static_cast<std::ptrdiff_t>(i) + c);
            const double w = jp[static_cast<std::size_t>(c + 3)];
            jp_mu += w * mu[r][k];
            const double* jr = jband[r].data() + 5 * k;
            for (int b = -2; b <= 2; ++b) jpj[static_cast<std::size_t>(c + b + 5)] += w * jr[b + 2];
          }
          rhs_vec(row) -= dt * eps * jp_mu;
          for (int o = -5; o <= 5; ++o) {
            triplets.emplace_back(row, static_cast<int>(r * cells + wrap(static_cast<std::ptrdiff_t>(i) + o)),
                                  dt * eps * jpj[static_cast<std::size_t>(o + 5)]);
          }
        }
      }
    }
    system.resize(size, size);
    system.setFromTriplets(triplets.begin(), triplets.end());
    system.makeCompressed();

    Eigen::VectorXd delta;
    if (analyzed_nnz != system.nonZeros()) {
      ldlt.analyzePattern(system);
      analyzed_nnz = system.nonZeros();
      use_lu = false;
    }
    if (!use_lu) {
      ldlt.factorize(system);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        delta = ldlt.solve(rhs_vec);
      } else {
        use_lu = true;
        lu.analyzePattern(system);
      }
    }
    if (use_lu) {
      lu.factorize(system);
      if (lu.info() != Eigen::Success) throw SolverError("diffusion system factorization failed");
      delta = lu.solve(rhs_vec);
    }
    if (!delta.allFinite()) throw SolverError("diffusion system solve failed");

    // mu at the new densities, linearized
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < cells; ++i) {
        const double* js = jband[s].data() + 5 * i;
        double acc = 0.0;
        for (int o = -2; o <= 2; ++o) {
          acc += js[o + 2] * delta(static_cast<Eigen::Index>(s * cells + wrap(static_cast<std::ptrdiff_t>(i) + o)));
        }
        mu_new[s][i] = mu[s][i] + acc;
      }
    }

    // Conservative update from face fluxes; the last species closes the sum.
    Vector gm(ni);
    for (std::size_t i = 0; i < cells; ++i) {
      const std::size_t j = grid.next(i);
      for (std::size_t s = 0; s < n; ++s) {
        gm(static_cast<Eigen::Index>(s)) = (mu_new[s][j] - mu_new[s][i]) * inv;
      }
      const Vector flux = -eps * (d_face[i] * gm);
      double total = 0.0;
      for (std::size_t s = 0; s + 1 < n; ++s) {
        fr[s][i] = flux(static_cast<Eigen::Index>(s));
        total += fr[s][i];
      }
      fr[n - 1][i] = -total;
    }
    for (std::size_t s = 0; s < n; ++s) {
      double* rho = rho_ptr(u0, s);
      const ScalarField& f = fr[s];
      for (std::size_t i = 0; i < cells; ++i) rho[i] -= dt * (f[i] - f[grid.prev(i)]) * inv;
    }
  }

  double stable(const MixtureState& state) const {
    const double dx = grid.size() == state.grid.size() ? grid.dx() : state.grid.dx();
    double dt = std::numeric_limits<double>::infinity();
    if (!frozen()) {
      double amax = 0.0, capmax = 0.0;
      const ScalarField vbar = mixture ? barycentric_velocity(state) : ScalarField{};
      for (std::size_t i = 0; i < state.grid.size(); ++i) {
        double vmax = mixture ? std::abs(vbar[i]) : 0.0;
        double cmax = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          const double rho = state.rho[s][i];
          if (!mixture) vmax = std::max(vmax, std::abs(state.mom[s][i] / rho));
          cmax = std::max(cmax, sound_speed(model.laws[s], rho));
          if (model.laws[s].has_capillarity()) {
            capmax = std::max(capmax, std::sqrt(rho * model.laws[s].kappa(rho)));
          }
        }
        amax = std::max(amax, vmax + cmax);
      }
      if (amax > 0.0) dt = std::min(dt, params.cfl * dx / amax);
      if (capmax > 0.0) dt = std::min(dt, params.parabolic_safety * dx * dx / capmax);
    }
    if (diffusive()) {
      const auto ni = static_cast<Eigen::Index>(n);
      double dmax = 0.0, hmax = 0.0;
      Vector rv(ni);
      for (std::size_t i = 0; i < state.grid.size(); ++i) {
        for (std::size_t s = 0; s < n; ++s) {
          rv(static_cast<Eigen::Index>(s)) = state.rho[s][i];
          hmax = std::max(hmax, model.laws[s].d2h(state.rho[s][i]));
        }
        const Matrix d = diffusion_matrix(model.b, rv);
        dmax = std::max(dmax, d.cwiseAbs().rowwise().sum().maxCoeff());
      }
      if (dmax * hmax > 0.0) {
        dt = std::min(dt, params.parabolic_safety * dx * dx / (model.eps * dmax * hmax));
      }
    }
    if (!std::isfinite(dt)) dt = params.t_end > 0.0 ? params.t_end : 1.0;
    return dt;
  }

  // One attempt at step size dt on u0 (already loaded). Returns dissipation.
  double attempt(double dt) {
    double diss = 0.0;
    if (!mixture) {
      diss += friction(0.5 * dt);
      rk3(dt);
      diss += friction(0.5 * dt);
      return diss;
    }
    if (!frozen()) rk3(dt);
    if (diffusive()) {
      diffuse(dt);
      check_floor(u0);
    }
    return diss;
  }

  std::pair<double, double> advance(MixtureState& state, double dt_cap) {
    ensure(state.grid);
    double dt = std::min(stable(state), dt_cap);
    for (int tries = 0; tries <= kMaxRetries; ++tries) {
      if (dt < kMinDt && dt < dt_cap) {
        throw SolverError("time step underflow (dt = " + std::to_string(dt) + ") at t = " +
                          std::to_string(state.t));
      }
      load(state);
      try {
        const double diss = attempt(dt);
        store(u0, state);
        state.t += dt;
        return {dt, diss};
      } catch (const RejectStep&) {
      } catch (const DomainError&) {
      }
      dt *= 0.5;
    }
    throw SolverError("density floor violated after " + std::to_string(kMaxRetries) +
                      " step halvings at t = " + std::to_string(state.t));
  }
};

Stepper::Stepper(const MixtureModel& model, const SolverParams& params, SystemKind kind)
    : impl_(std::make_unique<Impl>(model, params, kind)) {
  if (kind == SystemKind::relaxation && !(model.eps > 0.0)) {
    throw ValidationError("relaxation system needs eps > 0");
  }
}
Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

StepResult Stepper::step(const MixtureState& state, double dt_cap) {
  StepResult res;
  res.state = state;
  const auto [dt, diss] = impl_->advance(res.state, dt_cap);
  res.dt = dt;
  res.dissipated = diss;
  return res;
}

Increment rhs_transport_capillary(const MixtureModel& model, const MixtureState& state) {
  Stepper::Impl impl(model, SolverParams{}, SystemKind::relaxation);
  impl.load(state);
  impl.rhs(impl.u0, impl.du);
  Increment inc;
  const std::size_t cells = state.grid.size();
  for (std::size_t s = 0; s < impl.n; ++s) {
    inc.rho.emplace_back(impl.du.begin() + static_cast<std::ptrdiff_t>(s * cells),
                         impl.du.begin() + static_cast<std::ptrdiff_t>((s + 1) * cells));
    inc.mom.emplace_back(impl.du.begin() + static_cast<std::ptrdiff_t>((impl.n + s) * cells),
                         impl.du.begin() + static_cast<std::ptrdiff_t>((impl.n + s + 1) * cells));
  }
  return inc;
}

Increment rhs_mixture(const MixtureModel& model, const MixtureState& state) {
  Stepper::Impl impl(model, SolverParams{}, SystemKind::limit);
  impl.load(state);
  impl.rhs(impl.u0, impl.du);
  Increment inc;
  const std::size_t cells = state.grid.size();
  for (std::size_t s = 0; s < impl.n; ++s) {
    inc.rho.emplace_back(impl.du.begin() + static_cast<std::ptrdiff_t>(s * cells),
                         impl.du.begin() + static_cast<std::ptrdiff_t>((s + 1) * cells));
    inc.mom.emplace_back(cells, 0.0);
  }
  std::copy(impl.du.begin() + static_cast<std::ptrdiff_t>(impl.n * cells), impl.du.end(),
            inc.mom[0].begin());
  return inc;
}

double stable_dt(const MixtureModel& model, const MixtureState& state, const SolverParams& params,
                 SystemKind kind) {
  Stepper::Impl impl(model, params, kind);
  impl.ensure(state.grid);
  return impl.stable(state);
}

StepResult step_relaxation(const MixtureModel& model, const MixtureState& state,
                           const SolverParams& params, double dt_cap) {
  return Stepper(model, params, SystemKind::relaxation).step(state, dt_cap);
}

StepResult step_chapman_enskog(const MixtureModel& model, const MixtureState& state,
                               const SolverParams& params, double dt_cap) {
  return Stepper(model, params, SystemKind::chapman_enskog).step(state, dt_cap);
}

StepResult step_limit(const MixtureModel& model, const MixtureState& state,
                      const SolverParams& params, double dt_cap) {
  return Stepper(model, params, SystemKind::limit).step(state, dt_cap);
}

MixtureState mixture_projection(const MixtureState& state) {
  MixtureState out = state;
  const ScalarField v = barycentric_velocity(state);
  for (std::size_t s = 0; s < out.species(); ++s) {
    for (std::size_t i = 0; i < v.size(); ++i) out.mom[s][i] = out.rho[s][i] * v[i];
  }
  return out;
}

Trajectory run(const MixtureModel& model, const MixtureState& init, const SolverParams& params,
               SystemKind kind) {
  model.validate();
  params.validate();
  init.validate(params.rho_floor);
  if (init.species() != model.species()) throw ValidationError("state and model disagree on species");

  MixtureState state = kind == SystemKind::relaxation ? init : mixture_projection(init);
  if (kind == SystemKind::chapman_enskog && params.frozen_velocity) {
    for (auto& m : state.mom) std::fill(m.begin(), m.end(), 0.0);
  }
  Trajectory traj;
  traj.records.push_back(make_record(model, state, 0.0, 0.0));
  traj.snapshots.push_back(state);
  if (params.t_end == 0.0) return traj;

  Stepper stepper(model, params, kind);
  Stepper::Impl& impl = stepper.impl();
  const double t0 = state.t;
  const double snap_tol = 1e-12 * std::max(1.0, params.t_end);
  double dissipated = 0.0;
  for (std::size_t k = 1; k <= params.snapshots; ++k) {
    const double target =
        t0 + params.t_end * static_cast<double>(k) / static_cast<double>(params.snapshots);
    while (target - state.t > snap_tol) {
      const auto [dt, diss] = impl.advance(state, target - state.t);
      if (target - state.t <= snap_tol) state.t = target;
      dissipated += diss;
      traj.records.push_back(make_record(model, state, dt, dissipated));
    }
    state.t = target;
    traj.snapshots.push_back(state);
  }
  return traj;
}

MixtureState well_prepared_init(const MixtureModel& model, const Grid1D& grid,
                                const InitSpec& spec, double rho_floor) {
  const std::size_t n = model.species();
  auto pick = [n](const auto& v, auto fallback, std::size_t s) {
    if (v.empty()) return fallback;
    if (v.size() == 1) return v[0];
    if (v.size() != n) throw ConfigError("init lists must have one entry per species");
    return v[s];
  };
  std::vector<double> phase(n, 0.0);
  if (spec.random_phases) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
    for (auto& p : phase) p = dist(rng);
  } else {
    for (std::size_t s = 0; s < n; ++s) phase[s] = pick(spec.phase, 0.0, s);
  }

  MixtureState state(grid, n);
  const double w = 2.0 * std::numbers::pi / grid.length();
  for (std::size_t s = 0; s < n; ++s) {
    const double base = pick(spec.base, 1.0, s);
    const double amp = pick(spec.amplitude, 0.0, s);
    const int mode = pick(spec.mode, 1, s);
    if (!(base > 0.0)) throw ConfigError("base densities must be positive");
    if (base * (1.0 - std::abs(amp)) < rho_floor) {
      throw ConfigError("initial perturbation of species " + std::to_string(s + 1) +
                        " violates the density floor");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      state.rho[s][i] = base * (1.0 + amp * std::sin(mode * w * grid.x(i) + phase[s]));
    }
  }
  ScalarField v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    v[i] = spec.velocity_amplitude * std::sin(spec.velocity_mode * w * grid.x(i));
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < grid.size(); ++i) state.mom[s][i] = state.rho[s][i] * v[i];
  }
  if (spec.order == 1) {
    const auto flux = diffusion_fluxes(model, grid, state.rho);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < grid.size(); ++i) state.mom[s][i] += flux[s][i];
    }
  } else if (spec.order != 0) {
    throw ConfigError("init order must be 0 or 1");
  }
  state.validate(rho_floor);
  return state;
}

}  // namespace ekmix
