#include "ekmix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ekmix/errors.hpp"
#include "ekmix/friction.hpp"
#include "ekmix/io.hpp"

namespace ekmix {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MixtureModel model_at(const ExperimentConfig& config, double eps) {
  MixtureModel m = config.model;
  m.eps = eps;
  return m;
}

ojson header_json(const ExperimentConfig& config) {
  return ojson{{"ekmix", EKMIX_VERSION}, {"config_hash", config_hash_hex(config)}};
}

ojson audit_json(const AuditReport& a) {
  return ojson{{"max_excess", a.max_excess},
               {"final_defect", a.final_defect},
               {"max_abs_defect", a.max_abs_defect},
               {"tol", a.tol},
               {"pass", a.pass}};
}

ojson chi_json(const ChiValue& c) {
  return ojson{{"chi", c.chi},           {"chi_alt", c.chi_alt},
               {"kinetic", c.kinetic},   {"density", c.density},
               {"gradient", c.gradient}, {"gradient_alt", c.gradient_alt}};
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_json(const std::filesystem::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

std::string snapshot_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%04zu.csv", k);
  return buf;
}

std::string chi_csv(const CompareResult& r, const std::string& header) {
  std::string text = "# " + header + " eps=" + format_double(r.eps) + "\n";
  text += "t,chi,chi_alt,kinetic,density,gradient,gradient_alt,l2,relative_energy\n";
  for (const auto& p : r.series) {
    for (double v : {p.t, p.chi.chi, p.chi.chi_alt, p.chi.kinetic, p.chi.density, p.chi.gradient,
                     p.chi.gradient_alt, p.l2}) {
      text += format_double(v) + ",";
    }
    text += format_double(p.relative_energy) + "\n";
  }
  return text;
}

ojson compare_json(const CompareResult& r) {
  return ojson{{"eps", r.eps},
               {"sup_chi", r.sup_chi},
               {"sup_chi_alt", r.sup_chi_alt},
               {"sup_l2", r.sup_l2},
               {"weighting_sensitive", r.weighting_sensitive},
               {"wall_seconds", r.wall_seconds}};
}

Vector configured_density(const ExperimentConfig& config) {
  const auto n = static_cast<Eigen::Index>(config.model.species());
  Vector rho(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& base = config.init.base;
    rho(s) = base.empty() ? 1.0 : base.size() == 1 ? base[0] : base.at(static_cast<std::size_t>(s));
  }
  return rho;
}

DensityCheck check_density(const MixtureModel& model, const Vector& rho, std::mt19937_64& rng) {
  DensityCheck out;
  out.rho = rho;
  const Eigen::Index n = rho.size();
  const ReducedOperators ops = reduced_operators(model.b, rho);
  const Matrix& d = ops.d_full;
  out.symmetry_error = (d - d.transpose()).cwiseAbs().maxCoeff();
  out.row_sum_error = (d * Vector::Ones(n)).cwiseAbs().maxCoeff();
  out.d_norm = d.cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d, Eigen::EigenvaluesOnly);
  out.d_min_eigenvalue = eig.eigenvalues().minCoeff();

  Vector d2h(n);
  for (Eigen::Index s = 0; s < n; ++s) d2h(s) = model.laws[static_cast<std::size_t>(s)].d2h(rho(s));
  out.parabolic_min = parabolicity_check(ops, reduced_energy_hessian(d2h)).min_eigenvalue;

  out.coercivity = coercivity_constant(model.b, rho);
  out.coercivity_margin = std::numeric_limits<double>::infinity();
  bool coercive = true;
  if (n > 1) {
    std::normal_distribution<double> normal;
    const double total = rho.sum();
    for (int k = 0; k < 100; ++k) {
      Vector v(n);
      for (Eigen::Index s = 0; s < n; ++s) v(s) = normal(rng);
      const double vbar = rho.dot(v) / total;
      double rhs = 0.0;
      for (Eigen::Index s = 0; s < n; ++s) rhs += rho(s) * rho(s) * (v(s) - vbar) * (v(s) - vbar);
      rhs *= out.coercivity;
      const double lhs = friction_dissipation(model.b, rho, v);
      out.coercivity_margin = std::min(out.coercivity_margin, lhs - rhs);
      if (lhs < rhs - 1e-12 * std::max(1.0, lhs)) coercive = false;
    }
  }
  const double tol = 1e-12 * std::max(1.0, out.d_norm);
  out.pass = out.symmetry_error <= tol && out.row_sum_error <= tol &&
             out.d_min_eigenvalue >= -tol && out.parabolic_min > 0.0 && out.coercivity > 0.0 &&
             coercive;
  return out;
}

}  // namespace

void init_logging() {
  const char* level = std::getenv("EKMIX_LOG_LEVEL");
  // logs go to stderr so stdout stays clean for emitted data
  if (!spdlog::get("ekmix")) spdlog::set_default_logger(spdlog::stderr_color_mt("ekmix"));
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

void summarize(const MixtureModel& model, const Trajectory& traj, SimulationResult& out) {
  if (traj.records.empty() || traj.snapshots.empty()) return;
  const DiagnosticsRecord& first = traj.records.front();
  const double scale = momentum_scale(model, traj.snapshots.front());
  out.bounds.min_rho = std::numeric_limits<double>::infinity();
  for (const auto& r : traj.records) {
    for (std::size_t s = 0; s < r.masses.size(); ++s) {
      const double m0 = first.masses[s];
      out.mass_drift = std::max(out.mass_drift, std::abs(r.masses[s] - m0) / std::abs(m0));
    }
    out.momentum_drift = std::max(out.momentum_drift, std::abs(r.momentum - first.momentum) / scale);
    out.bounds.min_rho = std::min(out.bounds.min_rho, r.min_rho);
    out.bounds.max_grad_v = std::max(out.bounds.max_grad_v, r.max_grad_v);
    out.bounds.max_grad_div_v = std::max(out.bounds.max_grad_div_v, r.max_grad_div_v);
  }
}

SimulationResult simulate(const ExperimentConfig& config) {
  const Grid1D grid = config.grid();
  MixtureState init = well_prepared_init(config.model, grid, config.init_for(std::nullopt),
                                         config.solver.rho_floor);
  if (config.system != SystemKind::relaxation) init = mixture_projection(init);
  SimulationResult out;
  out.trajectory = run(config.model, init, config.solver, config.system);
  out.audit = energy_audit(out.trajectory, grid.dx(), config.audit_constant);
  summarize(config.model, out.trajectory, out);
  return out;
}

CompareResult compare(const ExperimentConfig& config, double eps) {
  const auto start = std::chrono::steady_clock::now();
  const MixtureModel model = model_at(config, eps);
  const Grid1D grid = config.grid();
  const MixtureState init =
      well_prepared_init(model, grid, config.init_for(config.reference), config.solver.rho_floor);
  spdlog::debug("compare eps={} against {}", eps, to_string(config.reference));
  const Trajectory relax = run(model, init, config.solver, SystemKind::relaxation);
  const Trajectory ref = run(model, mixture_projection(init), config.solver, config.reference);
  if (relax.snapshots.size() != ref.snapshots.size()) {
    throw SolverError("relaxation and reference produced different snapshot counts");
  }

  CompareResult out;
  out.eps = eps;
  for (std::size_t k = 0; k < relax.snapshots.size(); ++k) {
    const MixtureState& a = relax.snapshots[k];
    const MixtureState& b = ref.snapshots[k];
    const auto vel = reference_velocities(model, b, config.reference);
    ComparePoint p;
    p.t = a.t;
    p.chi = chi(model, a, b, vel);
    p.l2 = l2_distance(a, b, vel);
    p.relative_energy = relative_total_energy(model, a, b, vel);
    out.sup_chi = std::max(out.sup_chi, p.chi.chi);
    out.sup_chi_alt = std::max(out.sup_chi_alt, p.chi.chi_alt);
    out.sup_l2 = std::max(out.sup_l2, p.l2);
    out.weighting_sensitive = out.weighting_sensitive || p.chi.weighting_sensitive();
    out.series.push_back(p);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("eps={} sup_chi={:.6e} sup_l2={:.6e} ({:.1f} s)", eps, out.sup_chi, out.sup_l2,
               out.wall_seconds);
  return out;
}

SweepResult assess_rates(const std::vector<RateRow>& rows, double slope_min, double slope_max) {
  SweepResult out;
  out.rows = rows;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    double slope = kNaN;
    if (k > 0) {
      try {
        slope = convergence_rate({rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k + 1)}).slope;
      } catch (const PreconditionError&) {
      }
    }
    out.slope_running.push_back(slope);
  }
  out.monotone = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (!(rows[k].sup_chi < rows[k - 1].sup_chi)) out.monotone = false;
  }
  out.fit = convergence_rate(rows);
  out.in_band = out.fit.slope >= slope_min && out.fit.slope <= slope_max;
  return out;
}

SweepResult sweep(const ExperimentConfig& config, unsigned jobs) {
  const std::vector<double>& eps = config.eps_list;
  if (eps.size() < 2) throw ConfigError("sweep needs eps_list with at least two entries");
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(eps.size()));

  std::vector<CompareResult> runs(eps.size());
  std::vector<std::exception_ptr> errors(eps.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < eps.size(); k = next++) {
      try {
        runs[k] = compare(config, eps[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RateRow> rows;
  for (const auto& r : runs) {
    rows.push_back({r.eps, config.metric == SweepMetric::chi ? r.sup_chi : r.sup_l2});
  }
  SweepResult out = assess_rates(rows, config.slope_min, config.slope_max);
  out.runs = std::move(runs);
  return out;
}

CheckReport check(const ExperimentConfig& config) {
  CheckReport out;
  out.hypothesis_n = check_hypothesis_N(config.model.b, config.check_seed);
  std::mt19937_64 rng(config.check_seed);
  const auto n = static_cast<Eigen::Index>(config.model.species());
  out.pass = out.hypothesis_n.pass();
  if (out.hypothesis_n.connected) {
    std::uniform_real_distribution<double> dist(config.check_rho_lo, config.check_rho_hi);
    std::vector<Vector> samples{configured_density(config)};
    for (std::size_t k = 0; k < config.check_samples; ++k) {
      Vector rho(n);
      for (Eigen::Index s = 0; s < n; ++s) rho(s) = dist(rng);
      samples.push_back(rho);
    }
    for (const Vector& rho : samples) {
      out.densities.push_back(check_density(config.model, rho, rng));
      out.pass = out.pass && out.densities.back().pass;
    }
  }
  for (const EnergyLaw& law : config.model.laws) {
    out.a4.push_back(check_assumption_A4(law, config.check_rho_lo, config.check_rho_hi));
    out.pass = out.pass && out.a4.back().pass;
  }
  return out;
}

int cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out) {
  const std::string hash = config_hash_hex(config);
  const std::string header = provenance(hash);
  const SimulationResult res = simulate(config);
  const Trajectory& traj = res.trajectory;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const MixtureState& s = traj.snapshots[k];
    write_snapshot_csv(out / "snapshots" / snapshot_name(k), s,
                       reference_velocities(config.model, s, config.system), header);
  }
  write_diagnostics_jsonl(out / "diagnostics.jsonl", traj.records, hash);

  ojson report = header_json(config);
  report["system"] = to_string(config.system);
  report["eps"] = config.model.eps;
  report["t_end"] = traj.snapshots.back().t;
  report["steps"] = traj.records.size() - 1;
  report["snapshots"] = traj.snapshots.size();
  report["energy_initial"] = traj.records.front().energy;
  report["energy_final"] = traj.records.back().energy;
  report["dissipated"] = traj.records.back().dissipated;
  report["audit"] = audit_json(res.audit);
  report["mass_drift"] = res.mass_drift;
  report["momentum_drift"] = res.momentum_drift;
  report["bounds"] = ojson{{"min_rho", res.bounds.min_rho},
                           {"max_grad_v", res.bounds.max_grad_v},
                           {"max_grad_div_v", res.bounds.max_grad_div_v}};
  write_json(out / "report.json", report);
  spdlog::info("simulate: {} steps, audit {}", traj.records.size() - 1,
               res.audit.pass ? "pass" : "FAIL");
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out) {
  const std::string header = provenance(config_hash_hex(config));
  const CompareResult res = compare(config, config.model.eps);
  write_text(out / "chi.csv", chi_csv(res, header));
  ojson report = header_json(config);
  report["reference"] = to_string(config.reference);
  report.update(compare_json(res));
  write_json(out / "report.json", report);
  std::printf("sup_chi %s\n", format_double(res.sup_chi).c_str());
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& out, unsigned jobs) {
  const std::string header = provenance(config_hash_hex(config));
  const SweepResult res = sweep(config, jobs);
  const bool chi_metric = config.metric == SweepMetric::chi;
  std::string table = "# " + header + "\n";
  table += chi_metric ? "eps,sup_chi,slope_running\n" : "eps,sup_l2,slope_running\n";
  for (std::size_t k = 0; k < res.rows.size(); ++k) {
    table += format_double(res.rows[k].eps) + "," + format_double(res.rows[k].sup_chi) + "," +
             (std::isnan(res.slope_running[k]) ? std::string() : format_double(res.slope_running[k])) +
             "\n";
  }
  write_text(out / "rates.csv", table);
  ojson runs = ojson::array();
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    write_text(out / ("eps_" + std::to_string(k)) / "chi.csv", chi_csv(res.runs[k], header));
    runs.push_back(compare_json(res.runs[k]));
  }
  ojson report = header_json(config);
  report["reference"] = to_string(config.reference);
  report["metric"] = to_string(config.metric);
  report["slope"] = res.fit.slope;
  report["intercept"] = res.fit.intercept;
  report["slope_min"] = config.slope_min;
  report["slope_max"] = config.slope_max;
  report["in_band"] = res.in_band;
  report["monotone"] = res.monotone;
  report["runs"] = runs;
  write_json(out / "report.json", report);
  std::printf("slope %.4f band [%g, %g] %s\n", res.fit.slope, config.slope_min, config.slope_max,
              res.in_band ? "in band" : "OUT OF BAND");
  return res.in_band ? kExitOk : kExitFailed;
}

int cmd_check(const ExperimentConfig& config, const std::filesystem::path& out) {
  const CheckReport res = check(config);
  ojson report = header_json(config);
  const HypothesisNReport& hn = res.hypothesis_n;
  report["hypothesis_n"] = ojson{{"connected", hn.connected},
                                 {"rank_ok", hn.rank_ok},
                                 {"sigma_ratio_rank", hn.sigma_ratio_rank},
                                 {"sigma_ratio_null", hn.sigma_ratio_null},
                                 {"rho_sample", to_std(hn.rho_sample)}};
  ojson dens = ojson::array();
  std::size_t failed = 0;
  for (const auto& d : res.densities) {
    if (!d.pass) ++failed;
    dens.push_back(ojson{{"rho", to_std(d.rho)},
                         {"symmetry_error", d.symmetry_error},
                         {"row_sum_error", d.row_sum_error},
                         {"d_min_eigenvalue", d.d_min_eigenvalue},
                         {"parabolic_min_eigenvalue", d.parabolic_min},
                         {"coercivity", d.coercivity},
                         {"coercivity_margin", d.coercivity_margin},
                         {"pass", d.pass}});
  }
  report["densities_failed"] = failed;
  report["densities"] = dens;
  ojson a4 = ojson::array();
  for (const auto& r : res.a4) {
    a4.push_back(ojson{{"rho_range", {r.rho_lo, r.rho_hi}},
                       {"min_d2h", r.min_d2h},
                       {"min_kappa", r.min_kappa},
                       {"min_discriminant", r.min_discriminant},
                       {"pass", r.pass}});
  }
  report["a4"] = a4;
  report["pass"] = res.pass;
  write_json(out / "check.json", report);
  std::printf("check %s\n", res.pass ? "pass" : "FAIL");
  return res.pass ? kExitOk : kExitFailed;
}

int run_command(std::string_view command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out, unsigned jobs) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  }
  const std::filesystem::path dir = out ? *out : std::filesystem::path(config.output_dir);
  try {
    if (command == "simulate") return cmd_simulate(config, dir);
    if (command == "compare") return cmd_compare(config, dir);
    if (command == "sweep") return cmd_sweep(config, dir, jobs);
    if (command == "check") return cmd_check(config, dir);
    spdlog::error("unknown command '{}'", command);
    return kExitConfig;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const PreconditionError& e) {
    spdlog::error("{}", e.what());
    return kExitFailed;
  } catch (const std::exception& e) {
    spdlog::error("solver failure: {}", e.what());
    return kExitSolver;
  }
}

}  // namespace ekmix
