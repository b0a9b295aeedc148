#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "conservo/experiment.hpp"
#include "conservo/rk.hpp"

int main(int argc, char** argv) {
  CLI::App app{"conservo: invariant-preserving Runge-Kutta experiments"};
  app.require_subcommand(1);

  conservo::RunOptions opts;
  if (const char* env = std::getenv("CONSERVO_OUT"); env && *env) opts.out_dir = env;
  std::string out_dir;
  std::string config;

  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV artifacts");
  run->add_option("config", config, "Path to a TOML experiment config")->required();
  run->add_option("--out", out_dir, "Output directory (default: $CONSERVO_OUT or ./out)");
  run->add_option("--jobs,-j", opts.jobs, "Parallel cells")->check(CLI::PositiveNumber);
  run->add_flag("--long", opts.long_mode, "Enable full-length horizons and long-tagged configs");

  auto* systems = app.add_subcommand("list-systems", "List the available systems");
  auto* methods = app.add_subcommand("list-methods", "List methods and tableaus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*systems) {
    for (const auto& s : conservo::system_names()) std::cout << s << '\n';
    return 0;
  }
  if (*methods) {
    for (const char* m : {"bare-rk", "eip", "newton-projection", "stormer-verlet"}) {
      std::cout << m << '\n';
    }
    std::cout << "tableaus:";
    for (const auto& t : conservo::tableau_names()) std::cout << ' ' << t;
    std::cout << "\ndirections: predicted previous midpoint\n";
    return 0;
  }
  if (!out_dir.empty()) opts.out_dir = out_dir;
  return conservo::run_config_file(config, opts, std::cerr);
}
