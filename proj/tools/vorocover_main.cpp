// Command-line front end: validate a config, precompute the coverage oracle,
// or drive a full experiment and export the metric tables.
//
// Exit codes: 0 success, 1 configuration/validation failure, 2 runtime failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vorocover/config.hpp"
#include "vorocover/driver.hpp"
#include "vorocover/metrics_io.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) seeds.push_back(std::stoull(token));
  }
  return seeds;
}

void print_summary(const vorocover::ExperimentSpec& spec) {
  std::cout << "experiment '" << spec.name << "': " << spec.scenarios.size() << " densities, "
            << spec.modes.size() << " modes, " << spec.seeds.size() << " seeds, "
            << spec.scenarios.front().iterations << " iterations, M="
            << spec.scenarios.front().robot_count << ", grid "
            << spec.scenarios.front().domain.grid_resolution() << "x"
            << spec.scenarios.front().domain.grid_resolution() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized learning-coverage simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int parallelism = -1;
  std::string seed_override;
  bool export_fields = false;

  CLI::App* cmd_run = app.add_subcommand("run", "run the configured experiment");
  cmd_run->add_option("config", config_path, "YAML experiment config")->required();
  cmd_run->add_option("--output-dir", output_dir, "overrides the config's output directory");
  cmd_run->add_option("--parallelism", parallelism, "worker count (0 = hardware)");
  cmd_run->add_option("--seed-override", seed_override, "comma-separated seed list");
  cmd_run->add_flag("--export-fields", export_fields, "also write per-run field grids");

  CLI::App* cmd_oracle = app.add_subcommand("oracle", "precompute the coverage-cost oracle");
  cmd_oracle->add_option("config", config_path, "YAML experiment config")->required();
  cmd_oracle->add_option("--output-dir", output_dir, "overrides the config's output directory");

  CLI::App* cmd_validate = app.add_subcommand("validate", "check a config and print a summary");
  cmd_validate->add_option("config", config_path, "YAML experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  vorocover::ExperimentSpec spec;
  try {
    spec = vorocover::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return 1;
  }
  if (!output_dir.empty()) spec.output_dir = output_dir;

  try {
    if (cmd_validate->parsed()) {
      print_summary(spec);
      std::cout << "config ok\n";
      return 0;
    }

    std::filesystem::create_directories(spec.output_dir);

    if (cmd_oracle->parsed()) {
      std::ofstream out(spec.output_dir + "/oracle_costs.csv", std::ios::binary);
      out << "density_id,best_cost\n";
      for (const vorocover::ScenarioConfig& scenario : spec.scenarios) {
        const vorocover::ScalarField2D truth = scenario.density.discretize(scenario.domain);
        const vorocover::OracleResult oracle = vorocover::cvt_oracle(
            truth, scenario.robot_count, scenario.oracle_restarts,
            vorocover::derive_seed(scenario.oracle_seed, vorocover::fnv1a(scenario.density.name)));
        out << scenario.density.name << ',' << vorocover::format_double(oracle.best_cost) << "\n";
        std::cout << scenario.density.name << ": best cost " << oracle.best_cost << "\n";
      }
      std::cout << "wrote " << spec.output_dir << "/oracle_costs.csv\n";
      return 0;
    }

    // run
    print_summary(spec);
    vorocover::ExperimentOptions options;
    options.parallelism_override = parallelism;
    options.export_fields = export_fields;
    options.output_dir = spec.output_dir;
    if (!seed_override.empty()) options.seed_override = parse_seed_list(seed_override);
    const vorocover::ExperimentResult result = vorocover::run_experiment(spec, options);
    const std::string metrics_path = spec.output_dir + "/metrics.csv";
    vorocover::write_metrics(result.rows, metrics_path);
    std::cout << "wrote " << result.rows.size() << " rows to " << metrics_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
