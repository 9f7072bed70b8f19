#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rowsim/geo.hpp"
#include "rowsim/localization.hpp"
#include "rowsim/mission.hpp"
#include "rowsim/planner.hpp"
#include "rowsim/robot.hpp"
#include "rowsim/sensors.hpp"
#include "rowsim/world.hpp"

namespace rowsim {

struct ConfigError : std::runtime_error {
  int line;
  explicit ConfigError(const std::string& what, int line_no = 0)
      : std::runtime_error(line_no > 0 ? "config error at line " +
                                             std::to_string(line_no) + ": " + what
                                       : "config error: " + what),
        line(line_no) {}
};

/// Everything a run needs, with the experiment defaults baked in.
struct ExperimentConfig {
  FarmConfig farm;
  RobotSpec robot;
  LidarSpec lidar;
  GpsNoiseModel gps;
  ImuNoiseModel imu;
  OdomNoiseModel odom;
  CameraIntrinsics camera;
  CameraIntrinsics guidance_camera;
  GuidanceParams guidance;
  LogOddsModel log_odds;
  double map_resolution = 0.05;
  double map_occupied_threshold = 0.7;
  double map_free_threshold = -0.5;
  double mapping_pose_step = 0.1;
  LocalizationConfig localization;
  InflationParams inflation;
  DwaConfig dwa;
  MissionConfig mission;
  geo::GeoPoint anchor_geo{33.4552, -88.7944};
  double anchor_heading_deg = 90.0;
  NavMode mode = NavMode::map;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  geo::GeoAnchor anchor() const {
    return geo::GeoAnchor::from_geo(anchor_geo, deg2rad(anchor_heading_deg));
  }

  static ExperimentConfig defaults() {
    ExperimentConfig c;
    // default noise levels; zero them for the idealized runs
    c.lidar.noise_sigma = 0.01;
    c.lidar.canopy_mfp = 0.08;
    c.gps.white_sigma_deg = 1.2e-7;       // ~1.3 cm, RTK-grade
    c.gps.drift_step_sigma_deg = 1.0e-8;  // slow random walk
    c.imu.yaw_sigma = 0.008;
    c.odom.scale_sigma = 0.01;
    c.odom.trans_add_sigma = 0.003;
    c.odom.rot_add_sigma = 0.002;
    c.guidance_camera.width = 320;
    c.guidance_camera.height = 240;
    return c;
  }

  void validate() const {
    farm.validate();
    robot.validate();
    lidar.validate();
    camera.validate();
    guidance_camera.validate();
    mission.validate();
    if (map_resolution <= 0) throw ConfigError("mapping.resolution must be > 0");
    if (localization.particle_count < 1)
      throw ConfigError("localization.particles must be >= 1");
    if (seed == 0) throw ConfigError("seed must be nonzero");
  }

  void apply_seed() {
    farm.seed = seed;
    mission.seed = seed;
  }
};

namespace detail {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

inline double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

inline long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  const long long d = std::stoll(v, &pos);
  while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("expected boolean");
}

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t](const std::string& key, auto member) {
      t[key] = [member](ExperimentConfig& c, const std::string& v) {
        member(c) = parse_double(v);
      };
    };
    auto integer = [&t](const std::string& key, auto member) {
      t[key] = [member](ExperimentConfig& c, const std::string& v) {
        member(c) = static_cast<int>(parse_int(v));
      };
    };
    auto boolean = [&t](const std::string& key, auto member) {
      t[key] = [member](ExperimentConfig& c, const std::string& v) {
        member(c) = parse_bool(v);
      };
    };

    integer("farm.n_rows", [](ExperimentConfig& c) -> int& { return c.farm.n_rows; });
    integer("farm.plants_per_row",
            [](ExperimentConfig& c) -> int& { return c.farm.plants_per_row; });
    num("farm.row_spacing", [](ExperimentConfig& c) -> double& { return c.farm.row_spacing; });
    num("farm.plant_spacing",
        [](ExperimentConfig& c) -> double& { return c.farm.plant_spacing; });
    num("farm.plant_height",
        [](ExperimentConfig& c) -> double& { return c.farm.plant_height; });
    num("farm.plant_width", [](ExperimentConfig& c) -> double& { return c.farm.plant_width; });
    num("farm.origin_x", [](ExperimentConfig& c) -> double& { return c.farm.origin.x; });
    num("farm.origin_y", [](ExperimentConfig& c) -> double& { return c.farm.origin.y; });
    integer("farm.bolls_per_plant",
            [](ExperimentConfig& c) -> int& { return c.farm.bolls_per_plant; });
    num("farm.bounds_margin",
        [](ExperimentConfig& c) -> double& { return c.farm.bounds_margin; });
    num("farm.friction_primary",
        [](ExperimentConfig& c) -> double& { return c.farm.friction_primary; });
    num("farm.friction_secondary",
        [](ExperimentConfig& c) -> double& { return c.farm.friction_secondary; });

    num("robot.max_speed", [](ExperimentConfig& c) -> double& { return c.robot.max_speed; });
    num("robot.max_yaw_rate",
        [](ExperimentConfig& c) -> double& { return c.robot.max_yaw_rate; });
    num("robot.max_accel", [](ExperimentConfig& c) -> double& { return c.robot.max_accel; });
    num("robot.max_yaw_accel",
        [](ExperimentConfig& c) -> double& { return c.robot.max_yaw_accel; });
    num("robot.cruise_speed",
        [](ExperimentConfig& c) -> double& { return c.robot.cruise_speed; });

    integer("lidar.beam_count",
            [](ExperimentConfig& c) -> int& { return c.lidar.beam_count; });
    num("lidar.max_range", [](ExperimentConfig& c) -> double& { return c.lidar.max_range; });
    num("lidar.noise_sigma",
        [](ExperimentConfig& c) -> double& { return c.lidar.noise_sigma; });
    num("lidar.canopy_mfp", [](ExperimentConfig& c) -> double& { return c.lidar.canopy_mfp; });

    num("gps.white_sigma_deg",
        [](ExperimentConfig& c) -> double& { return c.gps.white_sigma_deg; });
    num("gps.drift_step_sigma_deg",
        [](ExperimentConfig& c) -> double& { return c.gps.drift_step_sigma_deg; });
    num("imu.yaw_sigma", [](ExperimentConfig& c) -> double& { return c.imu.yaw_sigma; });
    num("odom.scale_sigma",
        [](ExperimentConfig& c) -> double& { return c.odom.scale_sigma; });
    num("odom.trans_add_sigma",
        [](ExperimentConfig& c) -> double& { return c.odom.trans_add_sigma; });
    num("odom.rot_add_sigma",
        [](ExperimentConfig& c) -> double& { return c.odom.rot_add_sigma; });

    integer("camera.width", [](ExperimentConfig& c) -> int& { return c.camera.width; });
    integer("camera.height", [](ExperimentConfig& c) -> int& { return c.camera.height; });
    num("camera.hfov_deg", [](ExperimentConfig& c) -> double& { return c.camera.hfov_deg; });
    num("camera.vfov_deg", [](ExperimentConfig& c) -> double& { return c.camera.vfov_deg; });
    num("camera.fps", [](ExperimentConfig& c) -> double& { return c.camera.fps; });
    integer("vision.guidance_width",
            [](ExperimentConfig& c) -> int& { return c.guidance_camera.width; });
    integer("vision.guidance_height",
            [](ExperimentConfig& c) -> int& { return c.guidance_camera.height; });
    num("vision.gain", [](ExperimentConfig& c) -> double& { return c.guidance.gain; });
    num("vision.deadband", [](ExperimentConfig& c) -> double& { return c.guidance.deadband; });
    num("vision.min_row_frac",
        [](ExperimentConfig& c) -> double& { return c.guidance.min_row_frac; });
    t["vision.stride"] = [](ExperimentConfig& c, const std::string& v) {
      c.mission.vision_stride = static_cast<int>(parse_int(v));
    };

    num("mapping.resolution",
        [](ExperimentConfig& c) -> double& { return c.map_resolution; });
    num("mapping.log_odds_hit", [](ExperimentConfig& c) -> double& { return c.log_odds.hit; });
    num("mapping.log_odds_miss",
        [](ExperimentConfig& c) -> double& { return c.log_odds.miss; });
    num("mapping.clamp", [](ExperimentConfig& c) -> double& { return c.log_odds.clamp; });
    num("mapping.occupied_threshold",
        [](ExperimentConfig& c) -> double& { return c.map_occupied_threshold; });
    num("mapping.free_threshold",
        [](ExperimentConfig& c) -> double& { return c.map_free_threshold; });
    num("mapping.pose_step",
        [](ExperimentConfig& c) -> double& { return c.mapping_pose_step; });

    integer("localization.particles",
            [](ExperimentConfig& c) -> int& { return c.localization.particle_count; });
    num("localization.sigma",
        [](ExperimentConfig& c) -> double& { return c.localization.sigma; });
    num("localization.floor",
        [](ExperimentConfig& c) -> double& { return c.localization.floor_prob; });
    integer("localization.beam_subsample",
            [](ExperimentConfig& c) -> int& { return c.localization.beam_subsample; });
    num("localization.alpha1",
        [](ExperimentConfig& c) -> double& { return c.localization.motion.a1; });
    num("localization.alpha2",
        [](ExperimentConfig& c) -> double& { return c.localization.motion.a2; });
    num("localization.alpha3",
        [](ExperimentConfig& c) -> double& { return c.localization.motion.a3; });
    num("localization.alpha4",
        [](ExperimentConfig& c) -> double& { return c.localization.motion.a4; });
    num("localization.init_pos_sigma",
        [](ExperimentConfig& c) -> double& { return c.localization.init_pos_sigma; });
    num("localization.init_yaw_sigma",
        [](ExperimentConfig& c) -> double& { return c.localization.init_yaw_sigma; });

    num("planner.inscribed_radius",
        [](ExperimentConfig& c) -> double& { return c.inflation.inscribed_radius; });
    num("planner.inflation_radius",
        [](ExperimentConfig& c) -> double& { return c.inflation.inflation_radius; });
    num("planner.cost_decay",
        [](ExperimentConfig& c) -> double& { return c.inflation.cost_decay; });
    boolean("planner.unknown_is_lethal",
            [](ExperimentConfig& c) -> bool& { return c.inflation.unknown_is_lethal; });

    num("dwa.sim_horizon", [](ExperimentConfig& c) -> double& { return c.dwa.sim_horizon; });
    num("dwa.dt", [](ExperimentConfig& c) -> double& { return c.dwa.dt; });
    integer("dwa.v_samples", [](ExperimentConfig& c) -> int& { return c.dwa.v_samples; });
    integer("dwa.w_samples", [](ExperimentConfig& c) -> int& { return c.dwa.w_samples; });
    num("dwa.weight_heading",
        [](ExperimentConfig& c) -> double& { return c.dwa.weight_heading; });
    num("dwa.weight_clearance",
        [](ExperimentConfig& c) -> double& { return c.dwa.weight_clearance; });
    num("dwa.weight_velocity",
        [](ExperimentConfig& c) -> double& { return c.dwa.weight_velocity; });
    num("dwa.lookahead", [](ExperimentConfig& c) -> double& { return c.dwa.lookahead; });

    num("mission.map_threshold",
        [](ExperimentConfig& c) -> double& { return c.mission.map_threshold; });
    num("mission.gps_threshold_deg",
        [](ExperimentConfig& c) -> double& { return c.mission.gps_threshold_deg; });
    num("mission.battery_return_level",
        [](ExperimentConfig& c) -> double& { return c.mission.battery_return_level; });
    num("mission.battery_rate",
        [](ExperimentConfig& c) -> double& { return c.mission.battery_rate; });
    num("mission.cruise_speed",
        [](ExperimentConfig& c) -> double& { return c.mission.cruise_speed; });
    num("mission.boll_dwell",
        [](ExperimentConfig& c) -> double& { return c.mission.boll_dwell_s; });
    num("mission.control_rate",
        [](ExperimentConfig& c) -> double& { return c.mission.control_rate; });
    integer("mission.midpoints",
            [](ExperimentConfig& c) -> int& { return c.mission.midpoints_per_corridor; });
    boolean("mission.include_edge_corridors", [](ExperimentConfig& c) -> bool& {
      return c.mission.include_edge_corridors;
    });
    num("mission.max_sim_time",
        [](ExperimentConfig& c) -> double& { return c.mission.max_sim_time; });
    num("mission.dock_radius",
        [](ExperimentConfig& c) -> double& { return c.mission.dock_radius; });
    num("mission.dock_timeout",
        [](ExperimentConfig& c) -> double& { return c.mission.dock_timeout; });
    num("mission.dock_tol_map",
        [](ExperimentConfig& c) -> double& { return c.mission.dock_tol_map; });
    num("mission.dock_tol_gps",
        [](ExperimentConfig& c) -> double& { return c.mission.dock_tol_gps; });
    num("mission.home_x", [](ExperimentConfig& c) -> double& { return c.mission.home.x; });
    num("mission.home_y", [](ExperimentConfig& c) -> double& { return c.mission.home.y; });
    num("mission.home_yaw", [](ExperimentConfig& c) -> double& { return c.mission.home.yaw; });

    num("anchor.lat", [](ExperimentConfig& c) -> double& { return c.anchor_geo.lat; });
    num("anchor.lon", [](ExperimentConfig& c) -> double& { return c.anchor_geo.lon; });
    num("anchor.heading_deg",
        [](ExperimentConfig& c) -> double& { return c.anchor_heading_deg; });

    t["run.mode"] = [](ExperimentConfig& c, const std::string& v) {
      if (v == "map")
        c.mode = NavMode::map;
      else if (v == "gps")
        c.mode = NavMode::gps;
      else
        throw std::invalid_argument("mode must be 'map' or 'gps'");
    };
    t["run.output_dir"] = [](ExperimentConfig& c, const std::string& v) {
      c.output_dir = v;
    };
    t["run.seed"] = [](ExperimentConfig& c, const std::string& v) {
      c.seed = static_cast<std::uint64_t>(parse_int(v));
    };
    return t;
  }();
  return table;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Line-oriented `section.key = value` configuration with `#` comments.
inline ExperimentConfig parse_config(std::istream& is,
                                     ExperimentConfig base = ExperimentConfig::defaults()) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = detail::trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'section.key = value'", line_no);
    const std::string key = detail::trim(content.substr(0, eq));
    const std::string value = detail::trim(content.substr(eq + 1));
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'", line_no);
    try {
      it->second(base, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("bad value for '" + key + "': " + e.what(), line_no);
    }
  }
  base.apply_seed();
  base.validate();
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse_config(f);
}

}  // namespace rowsim
