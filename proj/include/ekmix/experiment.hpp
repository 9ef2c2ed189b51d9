#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ekmix/config.hpp"
#include "ekmix/diagnostics.hpp"
#include "ekmix/energy.hpp"
#include "ekmix/friction.hpp"
#include "ekmix/solvers.hpp"

namespace ekmix {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitSolver = 2, kExitFailed = 3 };

/// Extremes of the monitored bounds over a run. They are reported, never enforced.
struct BoundsMonitor {
  double min_rho = 0.0;
  double max_grad_v = 0.0;
  double max_grad_div_v = 0.0;
};

struct SimulationResult {
  Trajectory trajectory;
  AuditReport audit;
  double mass_drift = 0.0;      ///< max over species of |M_i(t) - M_i(0)| / |M_i(0)|
  double momentum_drift = 0.0;  ///< max |P(t) - P(0)| / momentum_scale(initial state)
  BoundsMonitor bounds;
};

SimulationResult simulate(const ExperimentConfig& config);

/// Conservation drifts and bounds over a finished trajectory.
void summarize(const MixtureModel& model, const Trajectory& trajectory, SimulationResult& out);

struct ComparePoint {
  double t = 0.0;
  ChiValue chi;
  double l2 = 0.0;
  double relative_energy = 0.0;
};

struct CompareResult {
  double eps = 0.0;
  std::vector<ComparePoint> series;  ///< one point per snapshot, t = 0 first
  double sup_chi = 0.0;
  double sup_chi_alt = 0.0;
  double sup_l2 = 0.0;
  bool weighting_sensitive = false;
  double wall_seconds = 0.0;
};

/// Relaxation at the given eps against config.reference, both from
/// well-prepared data with chi(0) = 0.
CompareResult compare(const ExperimentConfig& config, double eps);

struct SweepResult {
  std::vector<CompareResult> runs;
  std::vector<RateRow> rows;          ///< (eps, sup of the configured metric)
  std::vector<double> slope_running;  ///< fit over rows[0..k]; NaN for k = 0
  RateFit fit;
  bool monotone = false;              ///< metric strictly decreases with eps
  bool in_band = false;
};

/// Fit and band decision for precomputed rows.
SweepResult assess_rates(const std::vector<RateRow>& rows, double slope_min, double slope_max);

/// compare() for every eps in config.eps_list, at most `jobs` at a time.
SweepResult sweep(const ExperimentConfig& config, unsigned jobs);

struct DensityCheck {
  Vector rho;
  double symmetry_error = 0.0;  ///< max |D - D^T|
  double row_sum_error = 0.0;   ///< max |D 1|
  double d_min_eigenvalue = 0.0;
  double d_norm = 0.0;
  double parabolic_min = 0.0;
  double coercivity = 0.0;
  double coercivity_margin = 0.0;  ///< min of dissipation - nu sum rho_i^2 |v_i - v|^2 over samples
  bool pass = false;
};

struct CheckReport {
  HypothesisNReport hypothesis_n;
  std::vector<DensityCheck> densities;  ///< configured densities first
  std::vector<A4Report> a4;             ///< per species over the configured range
  bool pass = false;
};

CheckReport check(const ExperimentConfig& config);

/// Commands write into `out` and return an ExitCode. Exceptions are mapped to
/// exit codes by run_command.
int cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out);
int cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& out, unsigned jobs);
int cmd_check(const ExperimentConfig& config, const std::filesystem::path& out);

/// Loads the config and dispatches; `out` overrides output.dir, jobs = 0
/// means one per logical core.
int run_command(std::string_view command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out, unsigned jobs);

/// Reads EKMIX_LOG_LEVEL (trace, debug, info, warn, error, off).
void init_logging();

}  // namespace ekmix
