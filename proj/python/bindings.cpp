#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ekmix/config.hpp"
#include "ekmix/diagnostics.hpp"
#include "ekmix/energy.hpp"
#include "ekmix/errors.hpp"
#include "ekmix/experiment.hpp"
#include "ekmix/friction.hpp"
#include "ekmix/grid.hpp"
#include "ekmix/model.hpp"
#include "ekmix/solvers.hpp"

namespace py = pybind11;
using namespace ekmix;

namespace {

Matrix to_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() > kMaxSpecies || m.cols() > kMaxSpecies) throw ValidationError("too many species");
  return m;
}

Vector to_vector(const Eigen::VectorXd& v) {
  if (v.size() > kMaxSpecies) throw ValidationError("too many species");
  return v;
}

Eigen::MatrixXd from(const Matrix& m) { return m; }
Eigen::VectorXd from(const Vector& v) { return v; }

MixtureModel make_model(std::vector<EnergyLaw> laws, const Eigen::MatrixXd& b, double eps) {
  MixtureModel m{std::move(laws), to_matrix(b), eps};
  m.validate();
  return m;
}

py::dict record_dict(const DiagnosticsRecord& r) {
  py::dict d;
  d["t"] = r.t;
  d["dt"] = r.dt;
  d["energy"] = r.energy;
  d["masses"] = r.masses;
  d["momentum"] = r.momentum;
  d["friction_dissipation"] = r.friction_dissipation;
  d["dissipated"] = r.dissipated;
  d["min_rho"] = r.min_rho;
  return d;
}

py::dict compare_dict(const CompareResult& r) {
  py::dict d;
  d["eps"] = r.eps;
  d["sup_chi"] = r.sup_chi;
  d["sup_chi_alt"] = r.sup_chi_alt;
  d["sup_l2"] = r.sup_l2;
  d["weighting_sensitive"] = r.weighting_sensitive;
  std::vector<double> t, chi_v, l2;
  for (const auto& p : r.series) {
    t.push_back(p.t);
    chi_v.push_back(p.chi.chi);
    l2.push_back(p.l2);
  }
  d["t"] = t;
  d["chi"] = chi_v;
  d["l2"] = l2;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multicomponent Euler-Korteweg relaxation and high-friction limits";
  m.attr("__version__") = EKMIX_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<EnthalpyKind>(m, "EnthalpyKind")
      .value("quadratic", EnthalpyKind::quadratic)
      .value("gamma_law", EnthalpyKind::gamma_law);
  py::enum_<CapillarityKind>(m, "CapillarityKind")
      .value("none", CapillarityKind::none)
      .value("constant", CapillarityKind::constant)
      .value("quantum", CapillarityKind::quantum)
      .value("power", CapillarityKind::power);
  py::enum_<SystemKind>(m, "SystemKind")
      .value("relaxation", SystemKind::relaxation)
      .value("chapman_enskog", SystemKind::chapman_enskog)
      .value("limit", SystemKind::limit);

  py::class_<EnergyLaw>(m, "EnergyLaw")
      .def_static("quadratic", &EnergyLaw::quadratic, py::arg("c"),
                  py::arg("kappa") = CapillarityKind::none, py::arg("k") = 0.0, py::arg("s") = 0.0)
      .def_static("gamma_law", &EnergyLaw::gamma_law, py::arg("c"), py::arg("gamma"),
                  py::arg("kappa") = CapillarityKind::none, py::arg("k") = 0.0, py::arg("s") = 0.0)
      .def_readwrite("c", &EnergyLaw::c)
      .def_readwrite("gamma", &EnergyLaw::gamma)
      .def_readwrite("k", &EnergyLaw::k)
      .def_readwrite("s", &EnergyLaw::s)
      .def("h", &EnergyLaw::h)
      .def("kappa", &EnergyLaw::kappa)
      .def("validate", &EnergyLaw::validate);

  m.def("pressure", &pressure);
  m.def("sound_speed", &sound_speed);
  m.def("a4_discriminant", &a4_discriminant);
  m.def(
      "check_a4",
      [](const EnergyLaw& law, double lo, double hi) {
        const A4Report r = check_assumption_A4(law, lo, hi);
        py::dict d;
        d["min_d2h"] = r.min_d2h;
        d["min_kappa"] = r.min_kappa;
        d["min_discriminant"] = r.min_discriminant;
        d["pass"] = r.pass;
        return d;
      },
      py::arg("law"), py::arg("rho_lo") = 0.5, py::arg("rho_hi") = 2.0);

  py::class_<MixtureModel>(m, "MixtureModel")
      .def(py::init(&make_model), py::arg("laws"), py::arg("b"), py::arg("eps"))
      .def_readwrite("eps", &MixtureModel::eps)
      .def_property_readonly("b", [](const MixtureModel& mm) { return from(mm.b); })
      .def_property_readonly("species", &MixtureModel::species);

  m.def("diffusion_matrix", [](const Eigen::MatrixXd& b, const Eigen::VectorXd& rho) {
    return from(diffusion_matrix(to_matrix(b), to_vector(rho)));
  });
  m.def("solve_constrained",
        [](const Eigen::MatrixXd& b, const Eigen::VectorXd& rho, const Eigen::VectorXd& d) {
          return from(solve_constrained(to_matrix(b), to_vector(rho), to_vector(d)));
        });
  m.def("coercivity_constant", [](const Eigen::MatrixXd& b, const Eigen::VectorXd& rho) {
    return coercivity_constant(to_matrix(b), to_vector(rho));
  });
  m.def("friction_graph_connected",
        [](const Eigen::MatrixXd& b) { return friction_graph_connected(to_matrix(b)); });

  py::class_<Grid1D>(m, "Grid1D")
      .def(py::init<std::size_t, double>(), py::arg("n_cells"), py::arg("length") = 1.0)
      .def_property_readonly("size", &Grid1D::size)
      .def_property_readonly("length", &Grid1D::length)
      .def_property_readonly("dx", &Grid1D::dx)
      .def("x", &Grid1D::x);

  py::class_<MixtureState>(m, "MixtureState")
      .def(py::init<const Grid1D&, std::size_t>())
      .def_readwrite("rho", &MixtureState::rho)
      .def_readwrite("mom", &MixtureState::mom)
      .def_readwrite("t", &MixtureState::t)
      .def_readonly("grid", &MixtureState::grid)
      .def_property_readonly("species", &MixtureState::species)
      .def("velocity", &MixtureState::velocity)
      .def("min_density", &MixtureState::min_density);

  py::class_<SolverParams>(m, "SolverParams")
      .def(py::init<>())
      .def_readwrite("cfl", &SolverParams::cfl)
      .def_readwrite("t_end", &SolverParams::t_end)
      .def_readwrite("rho_floor", &SolverParams::rho_floor)
      .def_readwrite("parabolic_safety", &SolverParams::parabolic_safety)
      .def_readwrite("snapshots", &SolverParams::snapshots)
      .def_readwrite("frozen_velocity", &SolverParams::frozen_velocity);

  py::class_<InitSpec>(m, "InitSpec")
      .def(py::init<>())
      .def_readwrite("base", &InitSpec::base)
      .def_readwrite("amplitude", &InitSpec::amplitude)
      .def_readwrite("mode", &InitSpec::mode)
      .def_readwrite("phase", &InitSpec::phase)
      .def_readwrite("velocity_amplitude", &InitSpec::velocity_amplitude)
      .def_readwrite("velocity_mode", &InitSpec::velocity_mode)
      .def_readwrite("order", &InitSpec::order)
      .def_readwrite("seed", &InitSpec::seed)
      .def_readwrite("random_phases", &InitSpec::random_phases);

  m.def("well_prepared_init", &well_prepared_init, py::arg("model"), py::arg("grid"),
        py::arg("spec"), py::arg("rho_floor") = 1e-6);
  m.def("mixture_projection", &mixture_projection);
  m.def(
      "run",
      [](const MixtureModel& model, const MixtureState& init, const SolverParams& params,
         SystemKind kind) {
        Trajectory traj;
        {
          py::gil_scoped_release release;
          traj = run(model, init, params, kind);
        }
        py::list records;
        for (const auto& r : traj.records) records.append(record_dict(r));
        return py::make_tuple(traj.snapshots, records);
      },
      py::arg("model"), py::arg("init"), py::arg("params"), py::arg("kind"));

  m.def("total_energy", &total_energy);
  m.def("chi", [](const MixtureModel& model, const MixtureState& a, const MixtureState& b) {
    return chi(model, a, b).chi;
  });
  m.def("convergence_rate", [](const std::vector<std::pair<double, double>>& rows) {
    std::vector<RateRow> r;
    for (const auto& [eps, value] : rows) r.push_back({eps, value});
    return convergence_rate(r).slope;
  });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("model", &ExperimentConfig::model)
      .def_readwrite("eps_list", &ExperimentConfig::eps_list)
      .def_readwrite("n_cells", &ExperimentConfig::n_cells)
      .def_readwrite("solver", &ExperimentConfig::solver)
      .def_readwrite("init", &ExperimentConfig::init)
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; });
  m.def("parse_config", &parse_config);
  m.def("load_config", &load_config);
  m.def("emit_config", &emit_config);
  m.def("config_hash", &config_hash_hex);
  m.def("compare", [](const ExperimentConfig& config, double eps) {
    CompareResult r;
    {
      py::gil_scoped_release release;
      r = compare(config, eps);
    }
    return compare_dict(r);
  });
  m.def("run_command", &run_command, py::arg("command"), py::arg("config"),
        py::arg("out") = std::nullopt, py::arg("jobs") = 0u);
}
