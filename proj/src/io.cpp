#include "ekmix/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ekmix/errors.hpp"

namespace ekmix {

std::string provenance(const std::string& config_hash) {
  return std::string("ekmix ") + EKMIX_VERSION + " config_hash=" + config_hash;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_snapshot_csv(const std::filesystem::path& path, const MixtureState& state,
                        const std::vector<ScalarField>& velocity, const std::string& header) {
  const std::size_t n = state.species();
  std::string text = "# " + header + " t=" + format_double(state.t) + "\nx";
  for (std::size_t s = 0; s < n; ++s) text += ",rho_" + std::to_string(s + 1);
  for (std::size_t s = 0; s < n; ++s) text += ",v_" + std::to_string(s + 1);
  text += '\n';
  for (std::size_t i = 0; i < state.grid.size(); ++i) {
    text += format_double(state.grid.x(i));
    for (std::size_t s = 0; s < n; ++s) text += ',' + format_double(state.rho[s][i]);
    for (std::size_t s = 0; s < n; ++s) text += ',' + format_double(velocity[s][i]);
    text += '\n';
  }
  write_text(path, text);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1));
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    if (!have_columns) {
      while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
      have_columns = true;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(cell.empty() ? std::nan("") : std::stod(cell));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_diagnostics_jsonl(const std::filesystem::path& path,
                             const std::vector<DiagnosticsRecord>& records,
                             const std::string& config_hash) {
  std::string text = nlohmann::json{{"ekmix", EKMIX_VERSION}, {"config_hash", config_hash}}.dump();
  text += '\n';
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["t"] = r.t;
    j["dt"] = r.dt;
    j["E_tot"] = r.energy;
    j["masses"] = r.masses;
    j["momentum"] = r.momentum;
    j["friction_dissipation"] = r.friction_dissipation;
    j["dissipated"] = r.dissipated;
    j["min_rho"] = r.min_rho;
    j["max_grad_v"] = r.max_grad_v;
    j["max_grad_div_v"] = r.max_grad_div_v;
    text += j.dump();
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace ekmix
