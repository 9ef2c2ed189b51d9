#include "ekmix/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "ekmix/errors.hpp"

namespace ekmix {

std::string_view to_string(SweepMetric metric) {
  return metric == SweepMetric::chi ? "chi" : "l2";
}

SweepMetric parse_sweep_metric(std::string_view name) {
  if (name == "chi") return SweepMetric::chi;
  if (name == "l2") return SweepMetric::l2;
  throw ConfigError("unknown sweep metric '" + std::string(name) + "'");
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void reject_unknown(const toml::table& tbl, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  const std::set<std::string_view> keys(allowed);
  for (const auto& [key, node] : tbl) {
    if (!keys.count(key.str())) fail(where, "unknown key '" + std::string(key.str()) + "'");
  }
}

const toml::table* subtable(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  const toml::table* tbl = node->as_table();
  if (!tbl) fail(std::string(name), "expected a table");
  return tbl;
}

double as_double(const toml::node& node, const std::string& where) {
  if (auto v = node.value<double>()) return *v;
  fail(where, "expected a number");
}

std::int64_t as_int(const toml::node& node, const std::string& where) {
  if (!node.is_integer()) fail(where, "expected an integer");
  return *node.value<std::int64_t>();
}

void read(const toml::table& tbl, std::string_view key, const std::string& where, double& out) {
  if (const toml::node* n = tbl.get(key)) out = as_double(*n, where + "." + std::string(key));
}

void read(const toml::table& tbl, std::string_view key, const std::string& where, bool& out) {
  if (const toml::node* n = tbl.get(key)) {
    if (!n->is_boolean()) fail(where + "." + std::string(key), "expected a boolean");
    out = *n->value<bool>();
  }
}

void read(const toml::table& tbl, std::string_view key, const std::string& where, std::string& out) {
  if (const toml::node* n = tbl.get(key)) {
    if (!n->is_string()) fail(where + "." + std::string(key), "expected a string");
    out = *n->value<std::string>();
  }
}

void read_count(const toml::table& tbl, std::string_view key, const std::string& where,
                std::size_t& out) {
  if (const toml::node* n = tbl.get(key)) {
    const auto v = as_int(*n, where + "." + std::string(key));
    if (v < 0) fail(where + "." + std::string(key), "must be nonnegative");
    out = static_cast<std::size_t>(v);
  }
}

std::vector<double> double_list(const toml::node& node, const std::string& where) {
  std::vector<double> out;
  if (const toml::array* arr = node.as_array()) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      out.push_back(as_double(*arr->get(i), where + "[" + std::to_string(i) + "]"));
    }
  } else {
    out.push_back(as_double(node, where));
  }
  return out;
}

std::vector<int> int_list(const toml::node& node, const std::string& where) {
  std::vector<int> out;
  if (const toml::array* arr = node.as_array()) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      out.push_back(static_cast<int>(as_int(*arr->get(i), where + "[" + std::to_string(i) + "]")));
    }
  } else {
    out.push_back(static_cast<int>(as_int(node, where)));
  }
  return out;
}

EnergyLaw parse_species(const toml::table& tbl, const std::string& where) {
  reject_unknown(tbl, where, {"h", "c", "gamma", "kappa", "k", "s"});
  EnergyLaw law;
  std::string h = "quadratic", kappa = "none";
  read(tbl, "h", where, h);
  read(tbl, "kappa", where, kappa);
  try {
    law.h_kind = parse_enthalpy_kind(h);
    law.kappa_kind = parse_capillarity_kind(kappa);
  } catch (const Error& e) {
    fail(where, e.what());
  }
  read(tbl, "c", where, law.c);
  read(tbl, "gamma", where, law.gamma);
  read(tbl, "k", where, law.k);
  read(tbl, "s", where, law.s);
  return law;
}

void parse_model(const toml::table& tbl, ExperimentConfig& cfg) {
  reject_unknown(tbl, "model", {"eps", "eps_list", "b", "species"});
  const toml::node* species = tbl.get("species");
  if (!species || !species->is_array_of_tables()) fail("model", "needs [[model.species]] entries");
  const toml::array& arr = *species->as_array();
  cfg.model.laws.clear();
  for (std::size_t s = 0; s < arr.size(); ++s) {
    cfg.model.laws.push_back(
        parse_species(*arr.get(s)->as_table(), "model.species[" + std::to_string(s) + "]"));
  }
  const auto n = static_cast<Eigen::Index>(cfg.model.laws.size());
  if (n > kMaxSpecies) fail("model", "too many species (max " + std::to_string(kMaxSpecies) + ")");

  cfg.model.b = Matrix::Zero(n, n);
  if (const toml::node* b = tbl.get("b")) {
    const toml::array* rows = b->as_array();
    if (!rows || static_cast<Eigen::Index>(rows->size()) != n) {
      fail("model.b", "must be an n x n array");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const toml::array* row = rows->get(static_cast<std::size_t>(i))->as_array();
      if (!row || static_cast<Eigen::Index>(row->size()) != n) fail("model.b", "must be an n x n array");
      for (Eigen::Index j = 0; j < n; ++j) {
        cfg.model.b(i, j) = as_double(*row->get(static_cast<std::size_t>(j)), "model.b");
      }
    }
  } else if (n > 1) {
    fail("model", "missing friction matrix b");
  }

  if (const toml::node* e = tbl.get("eps")) cfg.model.eps = as_double(*e, "model.eps");
  if (const toml::node* e = tbl.get("eps_list")) {
    cfg.eps_list = double_list(*e, "model.eps_list");
    if (!tbl.get("eps") && !cfg.eps_list.empty()) cfg.model.eps = cfg.eps_list.front();
  }
}

void parse_solver(const toml::table& tbl, ExperimentConfig& cfg) {
  reject_unknown(tbl, "solver",
                 {"system", "cfl", "t_end", "rho_floor", "flux", "friction_mode",
                  "parabolic_safety", "snapshots", "frozen_velocity"});
  std::string system(to_string(cfg.system));
  std::string friction(to_string(cfg.solver.friction_mode));
  std::string flux = "rusanov";
  read(tbl, "system", "solver", system);
  read(tbl, "friction_mode", "solver", friction);
  read(tbl, "flux", "solver", flux);
  if (flux != "rusanov") fail("solver.flux", "only 'rusanov' is available");
  try {
    cfg.system = parse_system_kind(system);
    cfg.solver.friction_mode = parse_friction_mode(friction);
  } catch (const Error& e) {
    fail("solver", e.what());
  }
  read(tbl, "cfl", "solver", cfg.solver.cfl);
  read(tbl, "t_end", "solver", cfg.solver.t_end);
  read(tbl, "rho_floor", "solver", cfg.solver.rho_floor);
  read(tbl, "parabolic_safety", "solver", cfg.solver.parabolic_safety);
  read_count(tbl, "snapshots", "solver", cfg.solver.snapshots);
  read(tbl, "frozen_velocity", "solver", cfg.solver.frozen_velocity);
}

void parse_init(const toml::table& tbl, ExperimentConfig& cfg) {
  reject_unknown(tbl, "init",
                 {"base", "amplitude", "mode", "phase", "velocity_amplitude", "velocity_mode",
                  "order", "seed", "random_phases"});
  InitSpec& init = cfg.init;
  if (const toml::node* n = tbl.get("base")) init.base = double_list(*n, "init.base");
  if (const toml::node* n = tbl.get("amplitude")) init.amplitude = double_list(*n, "init.amplitude");
  if (const toml::node* n = tbl.get("mode")) init.mode = int_list(*n, "init.mode");
  if (const toml::node* n = tbl.get("phase")) init.phase = double_list(*n, "init.phase");
  read(tbl, "velocity_amplitude", "init", init.velocity_amplitude);
  if (const toml::node* n = tbl.get("velocity_mode")) {
    init.velocity_mode = static_cast<int>(as_int(*n, "init.velocity_mode"));
  }
  if (const toml::node* n = tbl.get("order")) {
    cfg.init_order = static_cast<int>(as_int(*n, "init.order"));
    init.order = *cfg.init_order;
  }
  if (const toml::node* n = tbl.get("seed")) {
    const auto v = as_int(*n, "init.seed");
    if (v < 0) fail("init.seed", "must be nonnegative");
    init.seed = static_cast<std::uint64_t>(v);
  }
  read(tbl, "random_phases", "init", init.random_phases);
}

// Shortest text that parses back to the same double, always with a decimal
// point or exponent so TOML reads it as a float.
std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

template <class T, class F>
std::string list(const std::vector<T>& v, F f) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out + "]";
}

std::string quoted(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

InitSpec ExperimentConfig::init_for(std::optional<SystemKind> reference_system) const {
  InitSpec spec = init;
  if (init_order) {
    spec.order = *init_order;
  } else if (reference_system) {
    spec.order = *reference_system == SystemKind::chapman_enskog ? 1 : 0;
  }
  return spec;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.model.laws == b.model.laws && a.model.b == b.model.b && a.model.eps == b.model.eps &&
         a.eps_list == b.eps_list && a.n_cells == b.n_cells && a.length == b.length &&
         a.system == b.system && a.solver == b.solver && a.init == b.init &&
         a.init_order == b.init_order && a.reference == b.reference &&
         a.slope_min == b.slope_min && a.slope_max == b.slope_max && a.metric == b.metric &&
         a.check_rho_lo == b.check_rho_lo && a.check_rho_hi == b.check_rho_hi &&
         a.check_samples == b.check_samples && a.check_seed == b.check_seed &&
         a.audit_constant == b.audit_constant && a.output_dir == b.output_dir;
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
    solver.validate();
    (void)grid();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) || !std::isfinite(eps_list[i])) {
      throw ConfigError("eps_list entries must be positive");
    }
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) {
      throw ConfigError("eps_list must be strictly decreasing");
    }
  }
  if (reference == SystemKind::relaxation) {
    throw ConfigError("compare.reference must be chapman_enskog or limit");
  }
  if (init_order && *init_order != 0 && *init_order != 1) {
    throw ConfigError("init order must be 0 or 1");
  }
  if (!(slope_min <= slope_max)) throw ConfigError("sweep slope band is empty");
  if (!(check_rho_lo > 0.0 && check_rho_lo <= check_rho_hi)) {
    throw ConfigError("check.rho_range must be positive and ordered");
  }
  if (!(audit_constant > 0.0)) throw ConfigError("audit.constant must be positive");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

ExperimentConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(os.str());
  }
  reject_unknown(root, "config",
                 {"model", "grid", "solver", "init", "compare", "sweep", "check", "audit", "output"});
  ExperimentConfig cfg;
  const toml::table* model = subtable(root, "model");
  if (!model) throw ConfigError("config: missing [model]");
  parse_model(*model, cfg);

  if (const toml::table* g = subtable(root, "grid")) {
    reject_unknown(*g, "grid", {"n_cells", "length"});
    read_count(*g, "n_cells", "grid", cfg.n_cells);
    read(*g, "length", "grid", cfg.length);
  }
  if (const toml::table* s = subtable(root, "solver")) parse_solver(*s, cfg);
  if (const toml::table* i = subtable(root, "init")) parse_init(*i, cfg);
  if (const toml::table* c = subtable(root, "compare")) {
    reject_unknown(*c, "compare", {"reference"});
    std::string ref(to_string(cfg.reference));
    read(*c, "reference", "compare", ref);
    try {
      cfg.reference = parse_system_kind(ref);
    } catch (const Error& e) {
      fail("compare.reference", e.what());
    }
  }
  if (const toml::table* s = subtable(root, "sweep")) {
    reject_unknown(*s, "sweep", {"slope_min", "slope_max", "metric"});
    read(*s, "slope_min", "sweep", cfg.slope_min);
    read(*s, "slope_max", "sweep", cfg.slope_max);
    std::string metric(to_string(cfg.metric));
    read(*s, "metric", "sweep", metric);
    cfg.metric = parse_sweep_metric(metric);
  }
  if (const toml::table* c = subtable(root, "check")) {
    reject_unknown(*c, "check", {"rho_range", "samples", "seed"});
    if (const toml::node* r = c->get("rho_range")) {
      const auto range = double_list(*r, "check.rho_range");
      if (range.size() != 2) fail("check.rho_range", "expected [lo, hi]");
      cfg.check_rho_lo = range[0];
      cfg.check_rho_hi = range[1];
    }
    read_count(*c, "samples", "check", cfg.check_samples);
    if (const toml::node* n = c->get("seed")) {
      const auto v = as_int(*n, "check.seed");
      if (v < 0) fail("check.seed", "must be nonnegative");
      cfg.check_seed = static_cast<std::uint64_t>(v);
    }
  }
  if (const toml::table* a = subtable(root, "audit")) {
    reject_unknown(*a, "audit", {"constant"});
    read(*a, "constant", "audit", cfg.audit_constant);
  }
  if (const toml::table* o = subtable(root, "output")) {
    reject_unknown(*o, "output", {"dir"});
    read(*o, "dir", "output", cfg.output_dir);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[model]\n";
  os << "eps = " << fmt(cfg.model.eps) << "\n";
  if (!cfg.eps_list.empty()) os << "eps_list = " << list(cfg.eps_list, fmt) << "\n";
  const Eigen::Index n = cfg.model.b.rows();
  os << "b = [";
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) os << ", ";
    os << "[";
    for (Eigen::Index j = 0; j < n; ++j) os << (j ? ", " : "") << fmt(cfg.model.b(i, j));
    os << "]";
  }
  os << "]\n";
  for (const EnergyLaw& law : cfg.model.laws) {
    os << "\n[[model.species]]\n";
    os << "h = " << quoted(to_string(law.h_kind)) << "\n";
    os << "c = " << fmt(law.c) << "\n";
    os << "gamma = " << fmt(law.gamma) << "\n";
    os << "kappa = " << quoted(to_string(law.kappa_kind)) << "\n";
    os << "k = " << fmt(law.k) << "\n";
    os << "s = " << fmt(law.s) << "\n";
  }

  os << "\n[grid]\nn_cells = " << cfg.n_cells << "\nlength = " << fmt(cfg.length) << "\n";

  const SolverParams& p = cfg.solver;
  os << "\n[solver]\n";
  os << "system = " << quoted(to_string(cfg.system)) << "\n";
  os << "cfl = " << fmt(p.cfl) << "\n";
  os << "t_end = " << fmt(p.t_end) << "\n";
  os << "rho_floor = " << fmt(p.rho_floor) << "\n";
  os << "flux = \"rusanov\"\n";
  os << "friction_mode = " << quoted(to_string(p.friction_mode)) << "\n";
  os << "parabolic_safety = " << fmt(p.parabolic_safety) << "\n";
  os << "snapshots = " << p.snapshots << "\n";
  os << "frozen_velocity = " << (p.frozen_velocity ? "true" : "false") << "\n";

  const InitSpec& init = cfg.init;
  auto int_text = [](int v) { return std::to_string(v); };
  os << "\n[init]\n";
  if (!init.base.empty()) os << "base = " << list(init.base, fmt) << "\n";
  if (!init.amplitude.empty()) os << "amplitude = " << list(init.amplitude, fmt) << "\n";
  if (!init.mode.empty()) os << "mode = " << list(init.mode, int_text) << "\n";
  if (!init.phase.empty()) os << "phase = " << list(init.phase, fmt) << "\n";
  os << "velocity_amplitude = " << fmt(init.velocity_amplitude) << "\n";
  os << "velocity_mode = " << init.velocity_mode << "\n";
  if (cfg.init_order) os << "order = " << *cfg.init_order << "\n";
  os << "seed = " << init.seed << "\n";
  os << "random_phases = " << (init.random_phases ? "true" : "false") << "\n";

  os << "\n[compare]\nreference = " << quoted(to_string(cfg.reference)) << "\n";
  os << "\n[sweep]\nslope_min = " << fmt(cfg.slope_min) << "\nslope_max = " << fmt(cfg.slope_max)
     << "\nmetric = " << quoted(to_string(cfg.metric)) << "\n";
  os << "\n[check]\nrho_range = [" << fmt(cfg.check_rho_lo) << ", " << fmt(cfg.check_rho_hi)
     << "]\nsamples = " << cfg.check_samples << "\nseed = " << cfg.check_seed << "\n";
  os << "\n[audit]\nconstant = " << fmt(cfg.audit_constant) << "\n";
  os << "\n[output]\ndir = " << quoted(cfg.output_dir) << "\n";
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : emit_config(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

}  // namespace ekmix
