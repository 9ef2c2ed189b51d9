#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ekmix/config.hpp"
#include "ekmix/errors.hpp"
#include "ekmix/experiment.hpp"
#include "ekmix/io.hpp"

using namespace ekmix;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = EKMIX_SOURCE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ekmix_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kSmall = R"(
[model]
eps = 0.05
b = [[0.0, 1.0], [1.0, 0.0]]

[[model.species]]
h = "quadratic"
kappa = "constant"
k = 0.01

[[model.species]]
h = "gamma_law"
gamma = 1.4
kappa = "quantum"
k = 0.01

[grid]
n_cells = 32

[solver]
t_end = 0.01
snapshots = 2

[init]
base = [1.0, 0.9]
amplitude = [0.1, -0.05]
velocity_amplitude = 0.1
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_SUITE("cli-harness") {
  TEST_CASE("shipped configs round-trip") {
    for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
      if (entry.path().extension() != ".toml") continue;
      CAPTURE(entry.path().string());
      const ExperimentConfig a = load_config(entry.path());
      const std::string text = emit_config(a);
      const ExperimentConfig b = parse_config(text);
      CHECK(a == b);
      CHECK(emit_config(b) == text);
      CHECK(config_hash(a) == config_hash(b));
    }
  }

  TEST_CASE("config defaults and broadcasting") {
    const ExperimentConfig c = parse_config(kSmall);
    CHECK(c.model.species() == 2);
    CHECK(c.model.laws[1].h_kind == EnthalpyKind::gamma_law);
    CHECK(c.solver.cfl == 0.4);
    CHECK(c.solver.parabolic_safety == 0.25);
    CHECK(c.system == SystemKind::relaxation);
    CHECK_FALSE(c.init_order.has_value());
    CHECK(c.init_for(SystemKind::chapman_enskog).order == 1);
    CHECK(c.init_for(SystemKind::limit).order == 0);
    const ExperimentConfig other = parse_config(replace(kSmall, "eps = 0.05", "eps = 0.06"));
    CHECK(config_hash(c) != config_hash(other));
  }

  TEST_CASE("config validation") {
    const std::string base = kSmall;
    CHECK_THROWS_WITH_AS(parse_config(replace(base, "[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 1.0], [2.0, 0.0]]")),
                         "friction matrix not symmetric", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(replace(base, "[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 0.0], [0.0, 0.0]]")),
                         "friction graph is not connected", ConfigError);
    CHECK_THROWS_AS(parse_config(replace(base, "eps = 0.05", "eps_list = [0.01, 0.02]")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(base, "eps = 0.05", "eps_list = [0.02, 0.02]")), ConfigError);
    CHECK_NOTHROW(parse_config(replace(base, "eps = 0.05", "eps_list = [0.02, 0.01]")));
    CHECK_THROWS_AS(parse_config(replace(base, "t_end = 0.01", "t_end = 0.01\nbogus = 1")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(base, "n_cells = 32", "n_cells = 4")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(base, "t_end = 0.01", "t_end = 0.01\nflux = \"hll\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(replace(base, "k = 0.01", "k = -0.01")), ConfigError);
    CHECK_THROWS_AS(parse_config("[model\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
  }

  TEST_CASE("simulate with t_end = 0 writes the initial snapshot only") {
    TempDir dir;
    const ExperimentConfig c = parse_config(replace(kSmall, "t_end = 0.01", "t_end = 0.0"));
    CHECK(cmd_simulate(c, dir.path) == kExitOk);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "snapshots")) files += e.is_regular_file();
    CHECK(files == 1);
    const CsvTable t = read_csv(dir.path / "snapshots" / "snapshot_0000.csv");
    CHECK(t.columns == std::vector<std::string>{"x", "rho_1", "rho_2", "v_1", "v_2"});
    CHECK(t.rows.size() == 32);
  }

  TEST_CASE("simulate is deterministic and carries provenance") {
    TempDir a, b;
    const ExperimentConfig c = parse_config(kSmall);
    REQUIRE(cmd_simulate(c, a.path) == kExitOk);
    REQUIRE(cmd_simulate(c, b.path) == kExitOk);
    const std::string hash = config_hash_hex(c);
    for (const char* f : {"snapshots/snapshot_0000.csv", "snapshots/snapshot_0002.csv",
                          "diagnostics.jsonl", "report.json"}) {
      CAPTURE(f);
      const std::string x = slurp(a.path / f);
      CHECK_FALSE(x.empty());
      CHECK(x == slurp(b.path / f));
      CHECK(x.find(hash) != std::string::npos);
      CHECK(x.find(EKMIX_VERSION) != std::string::npos);
    }
    // every diagnostics line after the header is one step
    std::ifstream in(a.path / "diagnostics.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
      if (lines++ > 0) CHECK(line.find("\"E_tot\"") != std::string::npos);
    }
    CHECK(lines > 3);
  }

  TEST_CASE("csv values read back bit for bit") {
    TempDir dir;
    const ExperimentConfig c = parse_config(kSmall);
    const SimulationResult r = simulate(c);
    REQUIRE(cmd_simulate(c, dir.path) == kExitOk);
    const MixtureState& end = r.trajectory.snapshots.back();
    const CsvTable t = read_csv(dir.path / "snapshots" / "snapshot_0002.csv");
    for (std::size_t i = 0; i < 32; ++i) {
      CHECK(t.rows[i][1] == end.rho[0][i]);
      CHECK(t.rows[i][2] == end.rho[1][i]);
      CHECK(t.rows[i][3] == end.mom[0][i] / end.rho[0][i]);
    }
  }

  TEST_CASE("golden regression on the shipped two-species config") {
    TempDir dir;
    const fs::path golden = kSource / "tests" / "golden" / "golden_n2";
    const ExperimentConfig c = load_config(kSource / "configs" / "golden_n2.toml");
    REQUIRE(cmd_simulate(c, dir.path) == kExitOk);
    for (const char* f : {"snapshots/snapshot_0000.csv", "snapshots/snapshot_0001.csv",
                          "snapshots/snapshot_0002.csv"}) {
      CAPTURE(f);
      const CsvTable want = read_csv(golden / f);
      const CsvTable got = read_csv(dir.path / f);
      CHECK(got.comments == want.comments);
      CHECK(got.columns == want.columns);
      REQUIRE(got.rows.size() == want.rows.size());
      for (std::size_t i = 0; i < got.rows.size(); ++i) {
        for (std::size_t j = 0; j < got.rows[i].size(); ++j) {
          CHECK(std::abs(got.rows[i][j] - want.rows[i][j]) <= 1e-12 * (1.0 + std::abs(want.rows[i][j])));
        }
      }
    }
  }

  TEST_CASE("slope band decisions on synthetic data") {
    std::vector<RateRow> rows;
    for (double eps : {0.08, 0.04, 0.02, 0.01}) rows.push_back({eps, 5.0 * eps * eps});
    const SweepResult two = assess_rates(rows, 1.6, 2.4);
    CHECK(two.fit.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(two.in_band);
    CHECK(two.monotone);
    CHECK(std::isnan(two.slope_running[0]));
    CHECK(two.slope_running[3] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(assess_rates(rows, 0.8, 1.3).in_band);

    for (auto& r : rows) r.sup_chi = 0.3 * r.eps;
    CHECK(assess_rates(rows, 0.8, 1.3).in_band);
    rows[2].sup_chi = 1.0;
    CHECK_FALSE(assess_rates(rows, 0.0, 10.0).monotone);
  }

  TEST_CASE("sweep exit codes and outputs") {
    TempDir dir;
    const std::string text =
        replace(kSmall, "eps = 0.05", "eps_list = [0.08, 0.04]") + "\n[sweep]\nslope_min = -100.0\nslope_max = 100.0\n";
    ExperimentConfig c = parse_config(text);
    CHECK(cmd_sweep(c, dir.path, 2) == kExitOk);
    const CsvTable rates = read_csv(dir.path / "rates.csv");
    CHECK(rates.columns == std::vector<std::string>{"eps", "sup_chi", "slope_running"});
    CHECK(rates.rows.size() == 2);
    CHECK(fs::exists(dir.path / "eps_1" / "chi.csv"));
    CHECK(fs::exists(dir.path / "report.json"));
    c.slope_min = 50.0;
    c.slope_max = 60.0;
    CHECK(cmd_sweep(c, dir.path, 1) == kExitFailed);
  }

  TEST_CASE("compare starts from chi = 0") {
    const ExperimentConfig c = parse_config(kSmall);
    for (SystemKind ref : {SystemKind::chapman_enskog, SystemKind::limit}) {
      ExperimentConfig cc = c;
      cc.reference = ref;
      const CompareResult r = compare(cc, 0.05);
      REQUIRE(r.series.size() == 3);
      CHECK(r.series.front().chi.chi <= 1e-14);
      CHECK(r.sup_chi > 0.0);
    }
  }

  TEST_CASE("check command") {
    TempDir dir;
    const ExperimentConfig c = load_config(kSource / "configs" / "three_species.toml");
    CHECK(cmd_check(c, dir.path) == kExitOk);
    const std::string report = slurp(dir.path / "check.json");
    CHECK(report.find("\"pass\": true") != std::string::npos);
    const CheckReport r = check(c);
    CHECK(r.densities.size() == c.check_samples + 1);
    CHECK(r.a4.size() == 3);
  }

  TEST_CASE("command line exit codes") {
    TempDir dir;
    const std::string cli = EKMIX_CLI;
    auto run = [&](const std::string& args) {
      const std::string cmd = cli + " " + args + " > " + (dir.path / "stdout.txt").string() + " 2> " +
                              (dir.path / "stderr.txt").string();
      const int status = std::system(cmd.c_str());
      return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    auto write = [&](const std::string& name, const std::string& text) {
      const fs::path p = dir.path / name;
      std::ofstream(p) << text;
      return p.string();
    };
    const std::string ok = write("ok.toml", replace(kSmall, "t_end = 0.01", "t_end = 0.0"));
    CHECK(run("simulate --config " + ok + " --out " + (dir.path / "o").string()) == 0);

    const std::string asym = write("asym.toml", replace(kSmall, "[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 1.0], [2.0, 0.0]]"));
    CHECK(run("simulate --config " + asym + " --out " + (dir.path / "a").string()) == 1);
    CHECK(slurp(dir.path / "stderr.txt").find("friction matrix not symmetric") != std::string::npos);

    // the density floor cannot be kept, so halving gives up
    std::string floor_text = replace(kSmall, "t_end = 0.01", "t_end = 0.2\nrho_floor = 0.95");
    floor_text = replace(floor_text, "amplitude = [0.1, -0.05]", "amplitude = [0.04, 0.04]");
    floor_text = replace(floor_text, "base = [1.0, 0.9]", "base = [1.0, 1.0]");
    floor_text = replace(floor_text, "velocity_amplitude = 0.1", "velocity_amplitude = 0.5");
    const std::string floor = write("floor.toml", floor_text);
    CHECK(run("simulate --config " + floor + " --out " + (dir.path / "f").string()) == 2);

    CHECK(run("simulate") != 0);
    CHECK(run("frobnicate --config " + ok) != 0);
    CHECK(run("check --config " + ok + " --out " + (dir.path / "c").string()) == 0);
    CHECK(run("emit-config --config " + ok) == 0);
    CHECK(parse_config(slurp(dir.path / "stdout.txt")) == parse_config(slurp(ok)));
  }
}
