#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rowsim/config.hpp"
#include "rowsim/pipeline.hpp"

namespace {

rowsim::ExperimentConfig load_with_overrides(const std::string& config_path,
                                             const std::optional<std::uint64_t>& seed,
                                             const std::optional<std::string>& out,
                                             const std::optional<std::string>& mode) {
  rowsim::ExperimentConfig cfg = rowsim::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  if (mode) {
    if (*mode == "map")
      cfg.mode = rowsim::NavMode::map;
    else if (*mode == "gps")
      cfg.mode = rowsim::NavMode::gps;
    else
      throw rowsim::ConfigError("--mode must be 'map' or 'gps'");
  }
  cfg.apply_seed();
  cfg.validate();
  return cfg;
}

void print_report(const rowsim::RunArtifacts& art) {
  rowsim::write_nav_report(art.report, std::cout);
  std::cout << "completed = " << (art.completed ? "true" : "false") << "\n";
  std::cout << "collisions = " << art.collision_events << "\n";
  std::printf("mean_lateral_dev = %.4f\n", art.mean_lateral_dev);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rowsim: row-crop navigation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> mode;

  auto* run = app.add_subcommand("run", "run the full experiment pipeline");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--seed", seed, "override run.seed");
  run->add_option("--out", out_dir, "override run.output_dir");
  run->add_option("--mode", mode, "override run.mode (map|gps)");

  auto* map_cmd = app.add_subcommand("map", "mapping pass only; writes map.txt");
  map_cmd->add_option("config", config_path, "experiment config file")->required();
  map_cmd->add_option("--seed", seed, "override run.seed");
  map_cmd->add_option("--out", out_dir, "override run.output_dir");

  std::string planned_path, trajectory_path;
  double threshold = 0.25;
  auto* metrics_cmd =
      app.add_subcommand("metrics", "evaluate a recorded trajectory against waypoints");
  metrics_cmd->add_option("planned", planned_path, "planned waypoint CSV")->required();
  metrics_cmd->add_option("trajectory", trajectory_path, "trajectory CSV")->required();
  metrics_cmd->add_option("--threshold", threshold, "completion threshold r")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const rowsim::ExperimentConfig cfg =
          load_with_overrides(config_path, seed, out_dir, mode);
      const rowsim::RunArtifacts art = cfg.mode == rowsim::NavMode::map
                                           ? rowsim::run_map_pipeline(cfg)
                                           : rowsim::run_gps_pipeline(cfg);
      print_report(art);
      if (!art.completed) {
        std::cerr << "error: mission did not reach Done within mission.max_sim_time\n";
        return 1;
      }
      return 0;
    }
    if (map_cmd->parsed()) {
      rowsim::ExperimentConfig cfg =
          load_with_overrides(config_path, seed, out_dir, std::nullopt);
      const rowsim::FarmWorld world = rowsim::generate_farm(cfg.farm, cfg.anchor());
      const rowsim::OccupancyGrid grid = rowsim::run_mapping_pass(world, cfg);
      std::filesystem::create_directories(cfg.output_dir);
      const auto path = std::filesystem::path(cfg.output_dir) / "map.txt";
      rowsim::save_map(grid, path.string());
      std::cout << "map written to " << path.string() << "\n";
      return 0;
    }
    if (metrics_cmd->parsed()) {
      const rowsim::NavReport report =
          rowsim::replay_metrics(planned_path, trajectory_path, threshold);
      rowsim::write_nav_report(report, std::cout);
      return 0;
    }
  } catch (const rowsim::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
