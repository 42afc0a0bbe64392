#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rankdist/cli.hpp"

int main(int argc, char** argv) {
  using namespace rankdist;
  CLI::App app{"Rank-based wealth distribution: calibrate, project, tax, simulate, report"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> scenario;
  std::string sigma;
  std::optional<std::uint64_t> seed;
  std::string out;

  for (const char* name : {"calibrate", "project", "tax", "simulate", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--scenario", scenario, "trend preset 1..4")->check(CLI::Range(1, 4));
    sub->add_option("--sigma", sigma, "volatility variant")->check(CLI::IsMember({"low", "high"}));
    sub->add_option("--seed", seed, "simulation seed");
    sub->add_option("--out", out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto config = cli::load_run_config(config_path);
    cli::CommandOptions opts;
    opts.scenario = scenario;
    if (!sigma.empty()) opts.sigma = sigma == "high" ? SigmaVariant::High : SigmaVariant::Low;
    opts.seed = seed;
    if (!out.empty()) opts.out = out;
    return cli::run_command(app.get_subcommands().front()->get_name(), config, opts, std::cout);
  } catch (const Error& e) {
    std::cerr << "rankdist: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rankdist: " << e.what() << "\n";
    return 1;
  }
}
