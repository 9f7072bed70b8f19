#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rowsim/config.hpp"
#include "rowsim/mapping.hpp"
#include "rowsim/metrics.hpp"
#include "rowsim/mission.hpp"
#include "rowsim/world.hpp"

namespace rowsim {

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

}  // namespace detail

/// Ground-truth-posed mapping traversal: serpentine route over all corridors
/// (outer edges included so both flanks of the boundary rows are observed),
/// one scan integrated every pose_step meters.
inline OccupancyGrid run_mapping_pass(const FarmWorld& world,
                                      const ExperimentConfig& cfg) {
  MissionConfig mission_cfg = cfg.mission;
  mission_cfg.include_edge_corridors = true;
  const WaypointPlan route = generate_serpentine_waypoints(
      world.config, NavMode::map, world.geo_anchor, mission_cfg);

  Vec2 lo = world.bounds.lo, hi = world.bounds.hi;
  lo.x = std::min(lo.x, cfg.mission.home.x - 3.0);
  lo.y = std::min(lo.y, cfg.mission.home.y - 3.0);
  hi.x = std::max(hi.x, cfg.mission.home.x + 3.0);
  hi.y = std::max(hi.y, cfg.mission.home.y + 3.0);
  OccupancyGrid grid(grid_covering(lo, hi, cfg.map_resolution));
  grid.occupied_threshold = cfg.map_occupied_threshold;
  grid.free_threshold = cfg.map_free_threshold;

  LidarSpec lidar = cfg.lidar;
  RngStream rng = substream(cfg.seed, "mapping.lidar");
  const MountPose& lm = lidar.mount;
  const Pose2 lidar_offset{kTopPlateOffsetX + lm.x, lm.y, deg2rad(lm.yaw_deg)};

  std::vector<Pose2> route_points;
  route_points.push_back(cfg.mission.home);
  for (const Pose2& w : route.map_waypoints) route_points.push_back(w);

  for (std::size_t i = 0; i + 1 < route_points.size(); ++i) {
    const Vec2 a{route_points[i].x, route_points[i].y};
    const Vec2 b{route_points[i + 1].x, route_points[i + 1].y};
    const double seg = (b - a).norm();
    if (seg < 1e-9) continue;
    const double yaw = std::atan2(b.y - a.y, b.x - a.x);
    const int steps = std::max(1, static_cast<int>(seg / cfg.mapping_pose_step));
    for (int s = 0; s <= steps; ++s) {
      const Vec2 p = a + (b - a) * (static_cast<double>(s) / steps);
      RobotState st;
      st.x = p.x;
      st.y = p.y;
      st.yaw = yaw;
      const LidarScan scan = simulate_lidar(world, st, lidar, rng);
      const Pose3 sensor = mount_pose_world(st, lidar.mount);
      const Pose2 sensor_pose{sensor.position.x, sensor.position.y,
                              st.yaw + lidar_offset.yaw};
      integrate_scan(grid, sensor_pose, scan, cfg.log_odds);
    }
  }
  return grid;
}

struct TickLog {
  double t = 0.0;
  RobotState true_state;
  MissionTick tick;
};

struct RunArtifacts {
  NavReport report;
  std::vector<TickLog> log;
  std::vector<Vec2> planned_map_points;
  std::vector<geo::GeoPoint> planned_gps_points;
  double sim_duration = 0.0;
  int collision_events = 0;
  double mean_lateral_dev = 0.0;
  int row_following_ticks = 0;
  bool completed = false;
  std::filesystem::path out_dir;
};

namespace detail {

/// Oriented robot rectangle vs plant disk overlap.
inline bool robot_hits_plant(const RobotState& s, const RobotSpec& spec,
                             const FarmWorld& world) {
  for (const auto& p : world.plants) {
    const Vec2 rel = rotate(p.center - Vec2{s.x, s.y}, -s.yaw);
    const double hx = spec.length / 2.0, hy = spec.width / 2.0;
    const double dx = std::max(std::abs(rel.x) - hx, 0.0);
    const double dy = std::max(std::abs(rel.y) - hy, 0.0);
    if (dx * dx + dy * dy <= p.footprint_radius * p.footprint_radius) return true;
  }
  return false;
}

}  // namespace detail

/// Tick loop shared by both pipelines.
inline RunArtifacts run_mission(const FarmWorld& world, const ExperimentConfig& cfg,
                                std::optional<TernaryMap> known_map) {
  MissionSensorConfig sensors;
  sensors.lidar = cfg.lidar;
  sensors.gps = cfg.gps;
  sensors.imu = cfg.imu;
  sensors.odom = cfg.odom;
  sensors.camera = cfg.camera;
  sensors.guidance_camera = cfg.guidance_camera;
  sensors.guidance = cfg.guidance;

  const WaypointPlan plan = generate_serpentine_waypoints(
      world.config, cfg.mode, world.geo_anchor, cfg.mission);
  MissionController mission(world, plan, cfg.mission, cfg.robot, sensors,
                            cfg.localization, std::move(known_map), cfg.inflation,
                            cfg.dwa);

  RunArtifacts art;
  if (cfg.mode == NavMode::map) {
    for (const auto& w : plan.map_waypoints) art.planned_map_points.push_back({w.x, w.y});
  } else {
    art.planned_gps_points = plan.gps_waypoints;
    for (std::size_t i = 0; i < plan.gps_waypoints.size(); ++i)
      art.planned_map_points.push_back(mission.goal_map_point(static_cast<int>(i)));
  }

  RobotState state;
  state.x = cfg.mission.home.x;
  state.y = cfg.mission.home.y;
  state.yaw = cfg.mission.home.yaw;
  RobotState prev = state;

  const double dt = cfg.mission.control_dt();
  const int max_ticks = static_cast<int>(cfg.mission.max_sim_time / dt);
  double lateral_sum = 0.0;

  for (int k = 0; k < max_ticks; ++k) {
    MissionTick tick = mission.step(state, prev);
    art.log.push_back({state.time, state, tick});

    if (detail::robot_hits_plant(state, cfg.robot, world)) ++art.collision_events;
    if (tick.phase == MissionPhase::row_following) {
      ++art.row_following_ticks;
      lateral_sum +=
          std::abs(state.y - nearest_corridor_centerline(state.y, world.config));
    }
    if (tick.phase == MissionPhase::done) {
      art.completed = true;
      break;
    }
    prev = state;
    state = step_kinematics(state, tick.cmd, dt, cfg.robot);
    state = step_battery(state, dt, cfg.mission.battery_rate);
  }
  art.sim_duration = state.time;
  art.mean_lateral_dev =
      art.row_following_ticks > 0 ? lateral_sum / art.row_following_ticks : 0.0;

  // metrics: planned waypoints vs actual true trajectory, per navigation frame
  std::vector<Vec2> planned, actual;
  if (cfg.mode == NavMode::map) {
    planned = art.planned_map_points;
    for (const auto& l : art.log) actual.push_back({l.true_state.x, l.true_state.y});
    art.report.summary =
        aggregate(waypoint_errors(planned, actual), cfg.mission.map_threshold);
  } else {
    for (const auto& g : art.planned_gps_points) planned.push_back({g.lat, g.lon});
    for (const auto& l : art.log) {
      const geo::GeoPoint p =
          geo::map_to_gps(l.true_state.x, l.true_state.y, world.geo_anchor);
      actual.push_back({p.lat, p.lon});
    }
    art.report.summary =
        aggregate(waypoint_errors(planned, actual), cfg.mission.gps_threshold_deg);
  }
  art.report.errors = waypoint_errors(planned, actual);
  art.report.mode = to_string(cfg.mode);
  art.report.duration_s = art.sim_duration;
  return art;
}

// ---- artifact writers ----

inline void write_trajectory_csv(const RunArtifacts& art, std::ostream& os) {
  os << "t,x,y,yaw\n";
  char buf[128];
  for (const auto& l : art.log) {
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f\n", l.t, l.true_state.x,
                  l.true_state.y, l.true_state.yaw);
    os << buf;
  }
}

inline void write_gps_trajectory_csv(const RunArtifacts& art, const FarmWorld& world,
                                     std::ostream& os) {
  os << "t,lat,lon\n";
  char buf[128];
  for (const auto& l : art.log) {
    const geo::GeoPoint p =
        geo::map_to_gps(l.true_state.x, l.true_state.y, world.geo_anchor);
    std::snprintf(buf, sizeof(buf), "%.4f,%.9f,%.9f\n", l.t, p.lat, p.lon);
    os << buf;
  }
}

inline void write_mission_log_csv(const RunArtifacts& art, std::ostream& os) {
  os << "t,phase,waypoint_index,x_est,y_est,yaw_est,v_cmd,w_cmd,correction_deg,battery\n";
  char buf[256];
  for (const auto& l : art.log) {
    std::snprintf(buf, sizeof(buf), "%.4f,%s,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                  l.t, to_string(l.tick.phase), l.tick.waypoint_index, l.tick.x_est,
                  l.tick.y_est, l.tick.yaw_est, l.tick.cmd.v, l.tick.cmd.omega,
                  l.tick.correction_deg, l.true_state.battery);
    os << buf;
  }
}

inline const char* to_string(GuidanceConfidence c) {
  switch (c) {
    case GuidanceConfidence::full: return "full";
    case GuidanceConfidence::degraded: return "degraded";
    case GuidanceConfidence::none: return "none";
  }
  return "?";
}

inline void write_guidance_log_csv(const RunArtifacts& art, std::ostream& os) {
  os << "t,x_int,y_int,angle_deg,confidence\n";
  char buf[192];
  for (const auto& l : art.log) {
    if (!l.tick.frame_rendered) continue;
    const double xi = l.tick.sky_ground ? l.tick.sky_ground->x : std::nan("");
    const double yi = l.tick.sky_ground ? l.tick.sky_ground->y : std::nan("");
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f,%s\n", l.t, xi, yi,
                  l.tick.correction_deg, to_string(l.tick.guidance_confidence));
    os << buf;
  }
}

/// Flat key-value report plus a per-waypoint CSV; field order fixed.
inline void write_nav_report(const NavReport& r, std::ostream& os) {
  os << "mode = " << r.mode << "\n";
  os << "waypoints = " << r.summary.waypoint_count << "\n";
  os << "threshold = " << detail::fmt("%.9f", r.summary.threshold) << "\n";
  os << "ae = " << detail::fmt("%.9f", r.summary.ae) << "\n";
  os << "rmse = " << detail::fmt("%.9f", r.summary.rmse) << "\n";
  os << "cr_percent = " << detail::fmt("%.4f", r.summary.cr_percent) << "\n";
  os << "duration_s = " << detail::fmt("%.4f", r.duration_s) << "\n";
}

inline void write_nav_report_csv(const NavReport& r, std::ostream& os) {
  os << "waypoint,error\n";
  char buf[64];
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9f\n", i, r.errors[i]);
    os << buf;
  }
}

/// Planned waypoints (one color) vs actual trajectory (another), with legend
/// and a 5 m scale bar. Deterministic text output.
inline void write_trajectory_svg(const RunArtifacts& art, std::ostream& os) {
  double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
  auto grow = [&](const Vec2& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  };
  for (const auto& p : art.planned_map_points) grow(p);
  for (const auto& l : art.log) grow({l.true_state.x, l.true_state.y});
  if (art.log.empty() && art.planned_map_points.empty()) {
    min_x = min_y = 0;
    max_x = max_y = 1;
  }
  const double pad = 2.0;
  min_x -= pad;
  min_y -= pad;
  max_x += pad;
  max_y += pad;
  const double scale = 24.0;  // px per meter
  const double w = (max_x - min_x) * scale, h = (max_y - min_y) * scale;
  // map x -> up (rows run along +x); svg x = map y mirrored, svg y = -map x
  auto sx = [&](const Vec2& p) { return detail::fmt("%.2f", (max_y - p.y) * scale); };
  auto sy = [&](const Vec2& p) { return detail::fmt("%.2f", (max_x - p.x) * scale); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt("%.0f", h)
     << "\" height=\"" << detail::fmt("%.0f", w) << "\" viewBox=\"0 0 "
     << detail::fmt("%.2f", h) << " " << detail::fmt("%.2f", w) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#c62828\" stroke-width=\"1.5\" points=\"";
  for (const auto& l : art.log) {
    const Vec2 p{l.true_state.x, l.true_state.y};
    os << sx(p) << "," << sy(p) << " ";
  }
  os << "\"/>\n";
  for (const auto& p : art.planned_map_points)
    os << "<circle cx=\"" << sx(p) << "\" cy=\"" << sy(p)
       << "\" r=\"3\" fill=\"#1565c0\"/>\n";
  // legend
  os << "<rect x=\"10\" y=\"10\" width=\"190\" height=\"46\" fill=\"#ffffff\" "
        "stroke=\"#444444\"/>\n";
  os << "<circle cx=\"24\" cy=\"24\" r=\"4\" fill=\"#1565c0\"/>\n";
  os << "<text x=\"36\" y=\"28\" font-size=\"12\">planned waypoints</text>\n";
  os << "<line x1=\"16\" y1=\"42\" x2=\"32\" y2=\"42\" stroke=\"#c62828\" "
        "stroke-width=\"2\"/>\n";
  os << "<text x=\"36\" y=\"46\" font-size=\"12\">actual trajectory</text>\n";
  // scale bar: 5 m
  const double bar = 5.0 * scale;
  os << "<line x1=\"10\" y1=\"" << detail::fmt("%.2f", w - 14.0) << "\" x2=\""
     << detail::fmt("%.2f", 10.0 + bar) << "\" y2=\"" << detail::fmt("%.2f", w - 14.0)
     << "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";
  os << "<text x=\"10\" y=\"" << detail::fmt("%.2f", w - 20.0)
     << "\" font-size=\"12\">5 m</text>\n";
  os << "</svg>\n";
}

inline void write_waypoints_csv(const RunArtifacts& art, NavMode mode, std::ostream& os) {
  char buf[96];
  if (mode == NavMode::map) {
    os << "x,y\n";
    for (const auto& p : art.planned_map_points) {
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f\n", p.x, p.y);
      os << buf;
    }
  } else {
    os << "lat,lon\n";
    for (const auto& g : art.planned_gps_points) {
      std::snprintf(buf, sizeof(buf), "%.9f,%.9f\n", g.lat, g.lon);
      os << buf;
    }
  }
}

inline void write_artifacts(const RunArtifacts& art, const FarmWorld& world,
                            const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "trajectory.csv");
    write_trajectory_csv(art, f);
  }
  if (cfg.mode == NavMode::gps) {
    std::ofstream f(dir / "trajectory_gps.csv");
    write_gps_trajectory_csv(art, world, f);
  }
  {
    std::ofstream f(dir / "mission_log.csv");
    write_mission_log_csv(art, f);
  }
  {
    std::ofstream f(dir / "guidance_log.csv");
    write_guidance_log_csv(art, f);
  }
  {
    std::ofstream f(dir / "nav_report.txt");
    write_nav_report(art.report, f);
  }
  {
    std::ofstream f(dir / "nav_report.csv");
    write_nav_report_csv(art.report, f);
  }
  {
    std::ofstream f(dir / "trajectory.svg");
    write_trajectory_svg(art, f);
  }
  {
    std::ofstream f(dir / "waypoints.csv");
    write_waypoints_csv(art, cfg.mode, f);
  }
  {
    std::ofstream f(dir / "plants.csv");
    export_plants_csv(world, f);
  }
}

// ---- offline metrics over recorded files ----

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

struct ReplayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Recompute the navigation report from a planned-waypoint CSV (`x,y` or
/// `lat,lon`) and a trajectory CSV (`t,x,y,yaw` or `t,lat,lon`). Frames must
/// match; timestamps must be strictly increasing.
inline NavReport replay_metrics(const std::string& planned_path,
                                const std::string& trajectory_path, double threshold) {
  std::ifstream pf(planned_path);
  if (!pf) throw ReplayError("cannot open planned file: " + planned_path);
  std::ifstream tf(trajectory_path);
  if (!tf) throw ReplayError("cannot open trajectory file: " + trajectory_path);

  std::string line;
  if (!std::getline(pf, line)) throw ReplayError("planned file empty");
  auto pheader = detail::split_csv(line);
  bool planned_gps;
  if (pheader.size() >= 2 && pheader[0] == "x" && pheader[1] == "y")
    planned_gps = false;
  else if (pheader.size() >= 2 && pheader[0] == "lat" && pheader[1] == "lon")
    planned_gps = true;
  else
    throw ReplayError("planned header must be 'x,y' or 'lat,lon'");

  std::vector<Vec2> planned;
  int line_no = 1;
  while (std::getline(pf, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() < 2)
      throw ReplayError("planned line " + std::to_string(line_no) + ": need 2 columns");
    planned.push_back({std::stod(cells[0]), std::stod(cells[1])});
  }

  if (!std::getline(tf, line)) throw ReplayError("trajectory file empty");
  auto theader = detail::split_csv(line);
  bool traj_gps;
  if (theader.size() >= 3 && theader[0] == "t" && theader[1] == "x" && theader[2] == "y")
    traj_gps = false;
  else if (theader.size() >= 3 && theader[0] == "t" && theader[1] == "lat" &&
           theader[2] == "lon")
    traj_gps = true;
  else
    throw ReplayError("trajectory header must be 't,x,y[,yaw]' or 't,lat,lon'");
  if (traj_gps != planned_gps)
    throw ReplayError("frame mismatch: planned and trajectory files use different frames");

  std::vector<Vec2> actual;
  double prev_t = -std::numeric_limits<double>::infinity();
  line_no = 1;
  while (std::getline(tf, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() < 3)
      throw ReplayError("trajectory line " + std::to_string(line_no) +
                        ": need 3 columns");
    const double t = std::stod(cells[0]);
    if (t <= prev_t)
      throw ReplayError("trajectory line " + std::to_string(line_no) +
                        ": non-monotone timestamp");
    prev_t = t;
    actual.push_back({std::stod(cells[1]), std::stod(cells[2])});
  }

  NavReport r;
  r.mode = planned_gps ? "gps" : "map";
  r.errors = waypoint_errors(planned, actual);
  r.summary = aggregate(r.errors, threshold);
  r.duration_s = prev_t;
  return r;
}



namespace detail {

/// The embedded report is recomputed from the written files so the published
/// artifacts and the report always agree bit for bit.
inline void finalize_report(RunArtifacts& art, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  const bool gps = cfg.mode == NavMode::gps;
  const NavReport replayed = replay_metrics(
      (dir / "waypoints.csv").string(),
      (dir / (gps ? "trajectory_gps.csv" : "trajectory.csv")).string(),
      gps ? cfg.mission.gps_threshold_deg : cfg.mission.map_threshold);
  art.report.errors = replayed.errors;
  art.report.summary = replayed.summary;
  {
    std::ofstream f(dir / "nav_report.txt");
    write_nav_report(art.report, f);
  }
  {
    std::ofstream f(dir / "nav_report.csv");
    write_nav_report_csv(art.report, f);
  }
  art.out_dir = cfg.output_dir;
}

}  // namespace detail

/// Map-based pipeline: mapping pass, then the mission under particle-filter
/// localization.
inline RunArtifacts run_map_pipeline(const ExperimentConfig& cfg) {
  const FarmWorld world = generate_farm(cfg.farm, cfg.anchor());
  OccupancyGrid grid = run_mapping_pass(world, cfg);
  RunArtifacts art = run_mission(world, cfg, threshold_map(grid));
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  save_map(grid, (fs::path(cfg.output_dir) / "map.txt").string());
  write_artifacts(art, world, cfg);
  detail::finalize_report(art, cfg);
  return art;
}

/// GPS pipeline: no prior map; live local costmaps from the lidar.
inline RunArtifacts run_gps_pipeline(const ExperimentConfig& cfg) {
  const FarmWorld world = generate_farm(cfg.farm, cfg.anchor());
  RunArtifacts art = run_mission(world, cfg, std::nullopt);
  RunArtifacts out = art;
  std::filesystem::create_directories(cfg.output_dir);
  write_artifacts(out, world, cfg);
  detail::finalize_report(out, cfg);
  return out;
}

}  // namespace rowsim
