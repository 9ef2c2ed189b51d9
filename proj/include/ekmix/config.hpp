#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ekmix/grid.hpp"
#include "ekmix/model.hpp"
#include "ekmix/solvers.hpp"

namespace ekmix {

enum class SweepMetric { chi, l2 };

std::string_view to_string(SweepMetric metric);
SweepMetric parse_sweep_metric(std::string_view name);

/// Everything one experiment needs. `model.eps` is the single-run value;
/// `eps_list` (strictly decreasing) drives sweeps.
struct ExperimentConfig {
  MixtureModel model;
  std::vector<double> eps_list;

  std::size_t n_cells = 256;
  double length = 1.0;

  SystemKind system = SystemKind::relaxation;
  SolverParams solver;

  InitSpec init;
  /// Unset: compare/sweep pick first-order data against Chapman-Enskog and
  /// zeroth-order data against the limit; simulate uses init.order.
  std::optional<int> init_order;

  SystemKind reference = SystemKind::chapman_enskog;

  double slope_min = 1.6;
  double slope_max = 2.4;
  SweepMetric metric = SweepMetric::chi;

  double check_rho_lo = 0.5;
  double check_rho_hi = 2.0;
  std::size_t check_samples = 100;
  std::uint64_t check_seed = 0;

  double audit_constant = 1.0;

  std::string output_dir = "out";

  /// Throws ConfigError (or the underlying validation error) on bad input.
  void validate() const;
  [[nodiscard]] Grid1D grid() const { return Grid1D(n_cells, length); }
  /// Init spec with the order resolved for the given use.
  [[nodiscard]] InitSpec init_for(std::optional<SystemKind> reference_system) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

/// Parses TOML text. Species lists in [init] may hold one entry (broadcast)
/// or one per species.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical TOML; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

/// FNV-1a of the canonical text.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string config_hash_hex(const ExperimentConfig& config);

}  // namespace ekmix
