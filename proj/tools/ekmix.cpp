#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ekmix/config.hpp"
#include "ekmix/errors.hpp"
#include "ekmix/experiment.hpp"

int main(int argc, char** argv) {
  ekmix::init_logging();
  CLI::App app{"Multicomponent Euler-Korteweg high-friction experiments"};
  app.set_version_flag("--version", std::string(EKMIX_VERSION));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  unsigned jobs = 0;
  for (const char* name : {"simulate", "compare", "sweep", "check", "emit-config"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config (TOML)")->required()->check(CLI::ExistingFile);
    if (std::string(name) == "emit-config") {
      sub->description("print the canonical form of a config");
      continue;
    }
    sub->add_option("--out", out, "output directory (default: output.dir of the config)");
    sub->add_option("--jobs", jobs, "concurrent runs for sweep (default: logical cores)");
  }
  app.get_subcommand("simulate")->description("run one solver and write snapshots, diagnostics and a report");
  app.get_subcommand("compare")->description("relaxation against the reference system at one eps");
  app.get_subcommand("sweep")->description("compare over eps_list and fit the rate");
  app.get_subcommand("check")->description("friction-algebra and energy-law certificates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ekmix::kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  if (sub->get_name() == "emit-config") {
    try {
      std::fputs(ekmix::emit_config(ekmix::load_config(config)).c_str(), stdout);
      return ekmix::kExitOk;
    } catch (const ekmix::Error& e) {
      spdlog::error("{}", e.what());
      return ekmix::kExitConfig;
    }
  }
  std::optional<std::filesystem::path> dir;
  if (!out.empty()) dir = out;
  return ekmix::run_command(sub->get_name(), config, dir, jobs);
}
