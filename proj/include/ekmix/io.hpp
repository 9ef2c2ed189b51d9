#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ekmix/diagnostics.hpp"
#include "ekmix/grid.hpp"

namespace ekmix {

/// "ekmix <version> config_hash=<hex>"; every output file starts with it.
std::string provenance(const std::string& config_hash);

/// 17 significant digits, enough to read back the same double.
std::string format_double(double v);

/// Columns x, rho_1..rho_n, v_1..v_n; the first line is "# <provenance> t=<t>".
void write_snapshot_csv(const std::filesystem::path& path, const MixtureState& state,
                        const std::vector<ScalarField>& velocity, const std::string& header);

struct CsvTable {
  std::vector<std::string> comments;  ///< lines starting with '#', without the marker
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

/// First line {"ekmix": ..., "config_hash": ...}, then one record per line.
void write_diagnostics_jsonl(const std::filesystem::path& path,
                             const std::vector<DiagnosticsRecord>& records,
                             const std::string& config_hash);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ekmix
