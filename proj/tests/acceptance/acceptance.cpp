// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ekmix/config.hpp"
#include "ekmix/diagnostics.hpp"
#include "ekmix/energy.hpp"
#include "ekmix/experiment.hpp"
#include "ekmix/friction.hpp"
#include "ekmix/solvers.hpp"

using namespace ekmix;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = EKMIX_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string rows_text(const SweepResult& s) {
  std::string out;
  for (const auto& r : s.rows) out += fmt(" %.3g:%.3e", r.eps, r.sup_chi);
  return out;
}

// Same ensemble for criteria 4 to 6.
struct Instance {
  Matrix b;
  Vector rho;
};

std::vector<Instance> ensemble(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.1, 5.0);
  std::uniform_real_distribution<double> logr(std::log(0.1), std::log(10.0));
  std::uniform_int_distribution<int> size(2, 8);
  std::bernoulli_distribution extra(0.4);
  std::vector<Instance> out;
  for (std::size_t k = 0; k < count; ++k) {
    const Eigen::Index n = size(rng);
    Matrix b = Matrix::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) {
      std::uniform_int_distribution<Eigen::Index> parent(0, i - 1);
      const Eigen::Index p = parent(rng);
      b(i, p) = b(p, i) = w(rng);
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (b(i, j) == 0.0 && extra(rng)) b(i, j) = b(j, i) = w(rng);
    Vector rho(n);
    for (Eigen::Index i = 0; i < n; ++i) rho(i) = std::exp(logr(rng));
    out.push_back({b, rho});
  }
  return out;
}

Outcome ce_rate() {
  const ExperimentConfig c = load_config(kSource / "configs" / "ce_rate.toml");
  const SweepResult s = sweep(c, 0);
  ExperimentConfig fine = c;
  fine.n_cells = 2 * c.n_cells;
  const double coarse = s.runs.front().sup_chi;
  const double refined = compare(fine, c.eps_list.front()).sup_chi;
  const double change = std::abs(refined - coarse) / coarse;
  const bool band = s.fit.slope >= 1.6 && s.fit.slope <= 2.4;
  return {band && change < 0.1,
          fmt("slope=%.3f band=[1.6,2.4] grid_change=%.3f%%", s.fit.slope, 100.0 * change) +
              rows_text(s)};
}

Outcome zeroth_rate() {
  const ExperimentConfig c = load_config(kSource / "configs" / "zeroth_rate.toml");
  const SweepResult s = sweep(c, 0);
  return {s.fit.slope >= 0.8 && s.fit.slope <= 1.3,
          fmt("slope=%.3f band=[0.8,1.3]", s.fit.slope) + rows_text(s)};
}

Outcome isentropic() {
  const ExperimentConfig c = load_config(kSource / "configs" / "isentropic_rate.toml");
  const SweepResult s = sweep(c, 0);
  return {s.monotone && s.fit.slope >= 0.8,
          fmt("slope=%.3f monotone=%d", s.fit.slope, int(s.monotone)) + rows_text(s)};
}

Outcome constrained_solver(const std::vector<Instance>& set) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal;
  double max_res = 0.0, max_dev = 0.0;
  for (const auto& [b, rho] : set) {
    const Eigen::Index n = rho.size();
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = normal(rng);
    d(n - 1) -= d.sum();
    const Vector u = solve_constrained(b, rho, d);

    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = -Eigen::MatrixXd(build_tau(b, rho));
    a.row(n) = Eigen::VectorXd(rho).transpose();
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = d;
    rhs(n) = 0.0;
    const Eigen::VectorXd oracle = a.completeOrthogonalDecomposition().solve(rhs);
    const Eigen::VectorXd res = a * Eigen::VectorXd(u) - rhs;
    max_res = std::max(max_res, res.cwiseAbs().maxCoeff() / d.cwiseAbs().maxCoeff());
    max_dev = std::max(max_dev, (Eigen::VectorXd(u) - oracle).cwiseAbs().maxCoeff() /
                                    std::max(1.0, oracle.cwiseAbs().maxCoeff()));
  }
  return {max_res <= 1e-10 && max_dev <= 1e-9,
          fmt("instances=%zu max_residual=%.2e max_oracle_dev=%.2e", set.size(), max_res, max_dev)};
}

Outcome diffusion_structure(const std::vector<Instance>& set) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> gam(1.1, 3.0), cc(0.2, 2.0), ee(0.01, 1.0);
  double sym = 0.0, rows = 0.0, min_eig = 0.0, two_path = 0.0;
  std::size_t parabolic = 0;
  for (const auto& [b, rho] : set) {
    const Eigen::Index n = rho.size();
    const ReducedOperators ops = reduced_operators(b, rho);
    const Matrix& dm = ops.d_full;
    const double scale = dm.cwiseAbs().maxCoeff();
    sym = std::max(sym, (dm - dm.transpose()).cwiseAbs().maxCoeff() / scale);
    rows = std::max(rows, (dm * Vector::Ones(n)).cwiseAbs().maxCoeff() / scale);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dm);
    min_eig = std::min(min_eig, eig.eigenvalues()(0) / scale);

    Vector d2h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const EnergyLaw law = i % 2 ? EnergyLaw::gamma_law(cc(rng), gam(rng)) : EnergyLaw::quadratic(cc(rng));
      d2h(i) = law.d2h(rho(i));
    }
    if (parabolicity_check(ops, reduced_energy_hessian(d2h)).min_eigenvalue > 0.0) ++parabolic;

    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = normal(rng);
    const double eps = ee(rng);
    const Vector flux = relative_velocity_flux(ops, eps, g);
    const Vector other = rho.cwiseProduct(solve_constrained(b, rho, eps * driving_force(rho, g)));
    two_path = std::max(two_path, (flux - other).cwiseAbs().maxCoeff() / (1.0 + flux.cwiseAbs().maxCoeff()));
  }
  const bool pass = sym <= 1e-12 && rows <= 1e-12 && min_eig >= -1e-12 && parabolic == set.size() &&
                    two_path <= 1e-10;
  return {pass, fmt("symmetry=%.2e row_sum=%.2e min_eig=%.2e parabolic=%zu/%zu two_path=%.2e", sym, rows,
                    min_eig, parabolic, set.size(), two_path)};
}

Outcome coercivity(const std::vector<Instance>& set) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> normal;
  const std::size_t per = 100000 / set.size();
  std::size_t samples = 0, violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [b, rho] : set) {
    const Eigen::Index n = rho.size();
    const double nu = coercivity_constant(b, rho);
    if (!(nu > 0.0)) ++violations;
    for (std::size_t k = 0; k < per; ++k, ++samples) {
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
      const double vbar = rho.dot(v) / rho.sum();
      double rhs = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) rhs += rho(i) * rho(i) * (v(i) - vbar) * (v(i) - vbar);
      const double lhs = friction_dissipation(b, rho, v);
      const double margin = (lhs - nu * rhs) / std::max(1.0, lhs);
      worst = std::min(worst, margin);
      if (margin < -1e-12) ++violations;
    }
  }

  Matrix b2(2, 2);
  b2 << 0.0, 1.0, 1.0, 0.0;
  Vector ones = Vector::Ones(2);
  const double nu2 = coercivity_constant(b2, ones);
  double eq = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vector v(2);
    v << normal(rng), normal(rng);
    const double vbar = 0.5 * v.sum();
    const double rhs = (v(0) - vbar) * (v(0) - vbar) + (v(1) - vbar) * (v(1) - vbar);
    eq = std::max(eq, std::abs(friction_dissipation(b2, ones, v) - nu2 * rhs) / std::max(1.0, rhs));
  }
  return {violations == 0 && eq <= 1e-12,
          fmt("samples=%zu violations=%zu worst_margin=%.2e nu(n=2)=%.17g equality=%.2e", samples, violations,
              worst, nu2, eq)};
}

Outcome conservation() {
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(kSource / "configs"))
    if (e.path().extension() == ".toml") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  bool pass = !configs.empty();
  std::string detail;
  for (const auto& p : configs) {
    const SimulationResult r = simulate(load_config(p));
    const bool ok = r.mass_drift <= 1e-12 && r.momentum_drift <= 1e-12 && r.audit.pass;
    pass = pass && ok;
    detail += fmt(" %s[mass=%.1e mom=%.1e excess=%.1e tol=%.1e]", p.stem().c_str(), r.mass_drift,
                  r.momentum_drift, r.audit.max_excess, r.audit.tol);
  }

  // defect under refinement on the small two-species setup
  ExperimentConfig c = load_config(kSource / "configs" / "golden_n2.toml");
  c.solver.t_end = 0.1;
  std::vector<RateRow> rows;
  for (std::size_t n : {64, 128, 256}) {
    c.n_cells = n;
    const SimulationResult r = simulate(c);
    rows.push_back({c.grid().dx(), r.audit.max_abs_defect});
    detail += fmt(" N=%zu:defect=%.3e", n, r.audit.max_abs_defect);
  }
  const double order = convergence_rate(rows).slope;
  for (std::size_t k = 1; k < rows.size(); ++k)
    detail += fmt(" order%zu=%.3f", k, std::log(rows[k - 1].sup_chi / rows[k].sup_chi) / std::log(2.0));
  pass = pass && order >= 1.0;
  return {pass, fmt("defect_order=%.3f", order) + detail};
}

Outcome quantum() {
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> r(0.1, 10.0), q(-20.0, 20.0), kk(0.01, 2.0), gam(1.1, 3.0);
  std::vector<EnergyLaw> laws = load_config(kSource / "configs" / "quantum.toml").model.laws;
  for (int i = 0; i < 8; ++i) {
    laws.push_back(EnergyLaw::gamma_law(1.0, gam(rng), CapillarityKind::quantum, kk(rng)));
    laws.push_back(EnergyLaw::quadratic(kk(rng), CapillarityKind::quantum, kk(rng)));
  }
  double stress = 0.0, a4 = 0.0;
  bool a4_exact = true;
  for (const auto& law : laws) {
    for (int i = 0; i < 10000; ++i) {
      const double rho = r(rng);
      const double p = pressure(law, rho);
      const double s = stress_components(law, {rho, q(rng), q(rng)}).s;
      stress = std::max(stress, std::abs(s - p) / std::max(1.0, std::abs(p)));
      const double disc = a4_discriminant(law, rho);
      a4 = std::max(a4, std::abs(disc));
      a4_exact = a4_exact && disc == 0.0;
    }
    const A4Report rep = check_assumption_A4(law, 0.1, 10.0);
    a4_exact = a4_exact && rep.pass && rep.min_discriminant == 0.0;
  }
  return {stress <= 1e-14 && a4_exact,
          fmt("laws=%zu max|s-p|=%.2e max|a4|=%.2e", laws.size(), stress, a4)};
}

Outcome degeneracies() {
  ExperimentConfig c = load_config(kSource / "configs" / "ce_rate.toml");
  MixtureModel m = c.model;
  m.eps = 0.0;
  const MixtureState s = mixture_projection(well_prepared_init(m, c.grid(), c.init_for(SystemKind::limit)));
  const Trajectory a = run(m, s, c.solver, SystemKind::chapman_enskog);
  const Trajectory b = run(m, s, c.solver, SystemKind::limit);
  bool bitwise = a.snapshots.size() == b.snapshots.size();
  for (std::size_t k = 0; bitwise && k < a.snapshots.size(); ++k)
    bitwise = a.snapshots[k].t == b.snapshots[k].t && a.snapshots[k].rho == b.snapshots[k].rho &&
              a.snapshots[k].mom == b.snapshots[k].mom;

  MixtureModel one;
  one.laws = {EnergyLaw::gamma_law(1.0, 1.4, CapillarityKind::constant, 0.01)};
  one.b = Matrix::Zero(1, 1);
  one.eps = 0.05;
  const Grid1D g(256, 1.0);
  InitSpec spec;
  spec.base = {1.0};
  spec.amplitude = {0.1};
  spec.mode = {1};
  spec.velocity_amplitude = 0.1;
  SolverParams p;
  p.t_end = 0.1;
  p.snapshots = 10;
  const MixtureState s1 = well_prepared_init(one, g, spec);
  const Trajectory x = run(one, s1, p, SystemKind::relaxation);
  const Trajectory y = run(one, s1, p, SystemKind::limit);
  double diff = x.snapshots.size() == y.snapshots.size() ? 0.0 : INFINITY;
  for (std::size_t k = 0; k < std::min(x.snapshots.size(), y.snapshots.size()); ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      diff = std::max(diff, std::abs(x.snapshots[k].rho[0][i] - y.snapshots[k].rho[0][i]));
      diff = std::max(diff, std::abs(x.snapshots[k].mom[0][i] - y.snapshots[k].mom[0][i]));
    }
  }
  return {bitwise && diff <= 1e-12, fmt("eps0_bitwise=%d single_species_max_diff=%.2e", int(bitwise), diff)};
}

}  // namespace

int main() {
  init_logging();
  const std::vector<Instance> set = ensemble(1000, 2024);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"chapman-enskog rate", ce_rate},
      {"zeroth-order rate", zeroth_rate},
      {"isentropic limit", isentropic},
      {"constrained solver oracle", [&] { return constrained_solver(set); }},
      {"diffusion matrix structure", [&] { return diffusion_structure(set); }},
      {"coercivity", [&] { return coercivity(set); }},
      {"conservation and dissipation", conservation},
      {"quantum special case", quantum},
      {"degeneracies", degeneracies},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu %-30s %s  %s (%.1f s)\n", k + 1, criteria[k].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
