#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rowsim/geo.hpp"
#include "rowsim/localization.hpp"
#include "rowsim/mapping.hpp"
#include "rowsim/math.hpp"
#include "rowsim/metrics.hpp"
#include "rowsim/planner.hpp"
#include "rowsim/robot.hpp"
#include "rowsim/sensors.hpp"
#include "rowsim/vision.hpp"
#include "rowsim/world.hpp"

namespace rowsim {

enum class NavMode { map, gps };

inline const char* to_string(NavMode m) { return m == NavMode::map ? "map" : "gps"; }

struct WaypointPlan {
  NavMode mode = NavMode::map;
  std::vector<Pose2> map_waypoints;
  std::vector<geo::GeoPoint> gps_waypoints;
  Pose2 home{-6.0, 1.0, 0.0};

  std::size_t size() const {
    return mode == NavMode::map ? map_waypoints.size() : gps_waypoints.size();
  }
};

struct MissionConfig {
  double map_threshold = 0.25;     // m
  double gps_threshold_deg = 5e-6; // degree-space norm
  double battery_return_level = 40.0;
  double battery_rate = kDefaultBatteryRate;
  double cruise_speed = 0.5;
  double boll_dwell_s = 0.0;  // 0 disables boll halting
  double control_rate = 10.0; // Hz
  int midpoints_per_corridor = 3;
  bool include_edge_corridors = false;
  double max_sim_time = 3600.0;
  Pose2 home{-6.0, 1.0, 0.0};

  // waypoint capture
  double dock_radius = 0.4;       // m, switch from DWA to terminal control
  double dock_timeout = 12.0;     // s per waypoint before settling for reached
  double dock_tol_map = 0.08;     // m, completion tolerance under map noise
  double dock_tol_gps = 0.02;     // m, completion tolerance under gps noise
  double dock_yaw_tol = 1e-5;     // rad

  int vision_stride = 5;  // control ticks between guidance frames
  std::uint64_t seed = 1;

  double control_dt() const { return 1.0 / control_rate; }

  void validate() const {
    if (map_threshold <= 0 || gps_threshold_deg <= 0)
      throw std::invalid_argument("mission: thresholds must be > 0");
    if (control_rate <= 0) throw std::invalid_argument("mission: control_rate > 0");
    if (midpoints_per_corridor < 0) throw std::invalid_argument("mission: K >= 0");
  }
};

/// Serpentine coverage plan over the inter-row corridors, east row first,
/// alternating travel direction, starting from the home (SE) side.
inline WaypointPlan generate_serpentine_waypoints(const FarmConfig& farm, NavMode mode,
                                                  const geo::GeoAnchor& anchor,
                                                  const MissionConfig& cfg = {}) {
  if (farm.n_rows < 2)
    throw std::invalid_argument("serpentine plan needs n_rows >= 2 (no corridor)");
  WaypointPlan plan;
  plan.mode = mode;
  plan.home = cfg.home;

  const double L = farm.row_length();
  const double x_entry = farm.origin.x - 1.5;
  const double x_exit = farm.origin.x + L + 1.5;
  std::vector<double> centerlines;
  if (cfg.include_edge_corridors)
    centerlines.push_back(farm.origin.y - 0.5 * farm.row_spacing);
  for (int c = 0; c + 1 < farm.n_rows; ++c)
    centerlines.push_back(farm.origin.y + (c + 0.5) * farm.row_spacing);
  if (cfg.include_edge_corridors)
    centerlines.push_back(farm.origin.y + (farm.n_rows - 0.5) * farm.row_spacing);

  const int K = cfg.midpoints_per_corridor;
  for (std::size_t k = 0; k < centerlines.size(); ++k) {
    const double yc = centerlines[k];
    const bool northbound = (k % 2) == 0;
    const double yaw = northbound ? 0.0 : kPi;
    std::vector<double> xs;
    xs.push_back(northbound ? x_entry : x_exit);
    for (int j = 1; j <= K; ++j) {
      const double xm = farm.origin.x + L * j / (K + 1);
      xs.push_back(xm);
    }
    if (!northbound) std::reverse(xs.begin() + 1, xs.end());
    xs.push_back(northbound ? x_exit : x_entry);
    for (const double x : xs) plan.map_waypoints.push_back({x, yc, yaw});
  }
  if (mode == NavMode::gps) {
    for (const Pose2& p : plan.map_waypoints)
      plan.gps_waypoints.push_back(geo::map_to_gps(p.x, p.y, anchor));
    plan.map_waypoints.clear();
  }
  return plan;
}

inline bool waypoint_reached_map(const Vec2& estimate, const Vec2& waypoint,
                                 double threshold_m) {
  return (estimate - waypoint).norm() <= threshold_m;
}

/// Degree-space Euclidean norm over (dlat, dlon), boundary inclusive.
inline bool waypoint_reached_gps(const geo::GeoPoint& estimate,
                                 const geo::GeoPoint& waypoint, double threshold_deg) {
  return std::hypot(estimate.lat - waypoint.lat, estimate.lon - waypoint.lon) <=
         threshold_deg;
}

enum class MissionPhase {
  idle,
  navigate_to_waypoint,
  row_following,
  turning,
  boll_dwell,
  return_home,
  done
};

inline const char* to_string(MissionPhase p) {
  switch (p) {
    case MissionPhase::idle: return "Idle";
    case MissionPhase::navigate_to_waypoint: return "NavigateToWaypoint";
    case MissionPhase::row_following: return "RowFollowing";
    case MissionPhase::turning: return "Turning";
    case MissionPhase::boll_dwell: return "BollDwell";
    case MissionPhase::return_home: return "ReturnHome";
    case MissionPhase::done: return "Done";
  }
  return "?";
}

/// RowFollowing iff the along-row coordinate lies inside the planted extent
/// (end-exclusive) and the cross-row offset is within the corridor band.
inline MissionPhase classify_phase(const Vec2& pos, const FarmConfig& farm) {
  const double L = farm.row_length();
  if (pos.x < farm.origin.x || pos.x >= farm.origin.x + L) return MissionPhase::turning;
  for (int c = 0; c + 1 < farm.n_rows; ++c) {
    const double yc = farm.origin.y + (c + 0.5) * farm.row_spacing;
    if (std::abs(pos.y - yc) <= 0.6) return MissionPhase::row_following;
  }
  return MissionPhase::turning;
}

/// Nearest interior-corridor centerline, for lateral-deviation evaluation.
inline double nearest_corridor_centerline(double y, const FarmConfig& farm) {
  double best = farm.origin.y + 0.5 * farm.row_spacing;
  double bestd = std::abs(y - best);
  for (int c = 1; c + 1 < farm.n_rows; ++c) {
    const double yc = farm.origin.y + (c + 0.5) * farm.row_spacing;
    if (std::abs(y - yc) < bestd) {
      bestd = std::abs(y - yc);
      best = yc;
    }
  }
  return best;
}

struct MissionSensorConfig {
  LidarSpec lidar;
  GpsNoiseModel gps;
  ImuNoiseModel imu;
  OdomNoiseModel odom;
  CameraIntrinsics camera;          // primary camera model
  CameraIntrinsics guidance_camera; // resolution actually rendered for control
  GuidanceParams guidance;
};

struct LocalizationConfig {
  int particle_count = 500;
  double sigma = 0.2;
  double floor_prob = 0.05;
  int beam_subsample = 60;
  MotionNoise motion;
  double init_pos_sigma = 0.15;
  double init_yaw_sigma = 0.05;
};

/// Per-tick output of the mission controller.
struct MissionTick {
  VelocityCommand cmd;
  MissionPhase phase = MissionPhase::idle;
  int waypoint_index = 0;
  double x_est = 0, y_est = 0, yaw_est = 0;
  double correction_deg = 0.0;
  GuidanceConfidence guidance_confidence = GuidanceConfidence::none;
  bool flagged = false;  // safe-stop or degraded-localization event
  std::optional<GpsFix> gps_fix;
  bool frame_rendered = false;
  std::optional<IntersectionPoint> sky_ground;
};

/// Top-level tick-driven controller: waypoint dispatch, phase machine,
/// DWA + visual correction blending, terminal waypoint capture, battery
/// return-home and optional boll dwell.
class MissionController {
 public:
  MissionController(const FarmWorld& world, const WaypointPlan& plan,
                    const MissionConfig& cfg, const RobotSpec& spec,
                    const MissionSensorConfig& sensors,
                    const LocalizationConfig& loc_cfg,
                    std::optional<TernaryMap> known_map,
                    const InflationParams& inflation = {}, const DwaConfig& dwa = {})
      : world_(world),
        plan_(plan),
        cfg_(cfg),
        spec_(spec),
        sensors_(sensors),
        loc_cfg_(loc_cfg),
        inflation_(inflation),
        dwa_cfg_(dwa),
        lidar_rng_(substream(cfg.seed, "mission.lidar")),
        gps_sim_(sensors.gps, substream(cfg.seed, "mission.gps")),
        imu_rng_(substream(cfg.seed, "mission.imu")),
        odom_rng_(substream(cfg.seed, "mission.odom")),
        pf_rng_(substream(cfg.seed, "mission.pf")) {
    cfg_.validate();
    spec_.validate();
    dwa_spec_ = spec_;
    dwa_spec_.max_speed = cfg_.cruise_speed;
    if (plan_.size() == 0) throw std::invalid_argument("mission: empty waypoint plan");

    if (plan_.mode == NavMode::map) {
      if (!known_map) throw std::invalid_argument("map mode requires a known map");
      map_ = std::move(*known_map);
      field_ = build_likelihood_field(map_, loc_cfg_.sigma, loc_cfg_.floor_prob);
      global_costmap_ = inflate(map_, inflation_);
      particles_ = init_particles(plan_.home, loc_cfg_.init_pos_sigma,
                                  loc_cfg_.init_yaw_sigma, loc_cfg_.particle_count,
                                  pf_rng_);
      const MountPose& lm = sensors_.lidar.mount;
      lidar_offset_ = {kTopPlateOffsetX + lm.x, lm.y, deg2rad(lm.yaw_deg)};
    } else {
      // goals converted once through the anchor chain
      for (const auto& g : plan_.gps_waypoints)
        gps_goal_map_.push_back(geo::gps_to_map(g, world_.geo_anchor));
    }
    est_ = {plan_.home.x, plan_.home.y, plan_.home.yaw};
  }

  MissionPhase phase() const { return phase_; }
  int waypoint_index() const { return waypoint_index_; }
  const std::vector<Particle>& particles() const { return particles_; }

  /// One control tick. prev_true must be the state the previous returned
  /// command was applied to (odometry source).
  MissionTick step(const RobotState& true_state, const RobotState& prev_true) {
    const double dt = cfg_.control_dt();
    MissionTick out;
    out.waypoint_index = waypoint_index_;
    ++tick_;

    if (phase_ == MissionPhase::idle) phase_ = MissionPhase::navigate_to_waypoint;

    // --- (a) pose estimate
    if (plan_.mode == NavMode::map) {
      const LidarScan scan = simulate_lidar(world_, true_state, sensors_.lidar, lidar_rng_);
      const OdomDelta delta =
          simulate_odometry(prev_true, true_state, sensors_.odom, odom_rng_);
      predict(particles_, delta, loc_cfg_.motion, pf_rng_);
      try {
        update_weights(particles_, scan, field_, loc_cfg_.beam_subsample, lidar_offset_);
        resample(particles_, pf_rng_);
      } catch (const DegenerateFilterError&) {
        particles_ = init_particles({est_.x, est_.y, est_.yaw}, loc_cfg_.init_pos_sigma,
                                    loc_cfg_.init_yaw_sigma, loc_cfg_.particle_count,
                                    pf_rng_);
        out.flagged = true;
      }
      const PoseEstimate pe = estimate_pose(particles_);
      est_ = {pe.x, pe.y, pe.yaw};
      last_scan_ = scan;
    } else {
      const GpsFix fix = gps_sim_.sample(true_state, world_.geo_anchor, dt);
      const ImuReading imu = simulate_imu(true_state, sensors_.imu, imu_rng_);
      const Vec2 p = geo::gps_to_map({fix.lat, fix.lon}, world_.geo_anchor);
      est_ = {p.x, p.y, imu.yaw};
      out.gps_fix = fix;
      last_fix_ = fix;
      const LidarScan scan = simulate_lidar(world_, true_state, sensors_.lidar, lidar_rng_);
      last_scan_ = scan;
    }
    out.x_est = est_.x;
    out.y_est = est_.y;
    out.yaw_est = est_.yaw;

    if (phase_ == MissionPhase::done) {
      out.phase = phase_;
      return out;  // absorbing: zero command
    }

    // --- (b) battery return-home
    if (true_state.battery <= cfg_.battery_return_level &&
        phase_ != MissionPhase::return_home) {
      phase_ = MissionPhase::return_home;
      dock_.reset();
    }

    // --- (f) boll dwell
    if (phase_ == MissionPhase::boll_dwell) {
      if (true_state.time < boll_dwell_end_) {
        out.phase = phase_;
        return out;  // hold position
      }
      phase_ = resume_phase_;
    }
    if (cfg_.boll_dwell_s > 0.0 && phase_ != MissionPhase::return_home &&
        tick_ % cfg_.vision_stride == 0) {
      if (check_bolls(true_state)) {
        resume_phase_ = phase_after_motion();
        phase_ = MissionPhase::boll_dwell;
        boll_dwell_end_ = true_state.time + cfg_.boll_dwell_s;
        out.phase = phase_;
        return out;
      }
    }

    // --- goal selection
    const bool returning = phase_ == MissionPhase::return_home;
    const Vec2 goal = returning ? Vec2{plan_.home.x, plan_.home.y}
                                : goal_map_point(waypoint_index_);

    // --- phase classification while under way
    if (!returning) {
      if (waypoint_index_ == 0 && phase_ != MissionPhase::boll_dwell) {
        phase_ = MissionPhase::navigate_to_waypoint;
      } else {
        phase_ = classify_phase({est_.x, est_.y}, world_.config);
      }
    }

    // --- (c)(d) motion: terminal capture near the goal, DWA elsewhere
    const double dist_goal = (Vec2{est_.x, est_.y} - goal).norm();
    bool advanced = false;
    if (dist_goal <= cfg_.dock_radius) {
      if (!dock_.active) {
        dock_.active = true;
        dock_.t_start = true_state.time;
        dock_.prev_dist = std::numeric_limits<double>::infinity();
        dock_.stage = DockState::Stage::brake;
      }
      out.cmd = dock_step(true_state, goal, dt, &advanced);
    } else {
      dock_.reset();
      out.cmd = drive_step(true_state, goal, dt, &out);
    }

    // --- (e) waypoint advancement
    if (advanced) {
      if (returning || waypoint_index_ + 1 >= static_cast<int>(plan_.size())) {
        phase_ = MissionPhase::done;
      } else {
        ++waypoint_index_;
      }
      dock_.reset();
    }

    out.phase = phase_;
    out.waypoint_index = waypoint_index_;
    return out;
  }

  /// True map-frame goal for the active waypoint.
  Vec2 goal_map_point(int index) const {
    if (plan_.mode == NavMode::map) {
      const Pose2& w = plan_.map_waypoints[index];
      return {w.x, w.y};
    }
    return gps_goal_map_[index];
  }

  bool reached(int index) const {
    if (plan_.mode == NavMode::map)
      return waypoint_reached_map({est_.x, est_.y},
                                  goal_map_point(index), cfg_.map_threshold);
    return waypoint_reached_gps({last_fix_.lat, last_fix_.lon},
                                plan_.gps_waypoints[index], cfg_.gps_threshold_deg);
  }

 private:
  struct DockState {
    enum class Stage { brake, rotate, drive, align };
    bool active = false;
    Stage stage = Stage::brake;
    double t_start = 0.0;
    double prev_dist = std::numeric_limits<double>::infinity();
    double prev_err = std::numeric_limits<double>::infinity();
    void reset() { active = false; }
  };

  MissionPhase phase_after_motion() const {
    if (waypoint_index_ == 0) return MissionPhase::navigate_to_waypoint;
    return classify_phase({est_.x, est_.y}, world_.config);
  }

  bool check_bolls(const RobotState& true_state) {
    for (const char* cam_id : {"secondary_camera", "tertiary_camera"}) {
      const Pose3 cam = mount_pose_world(true_state, find_mount(cam_id));
      const auto dets = detect_bolls(world_, cam, sensors_.camera,
                                     cam_id[0] == 's' ? SideCamera::secondary
                                                      : SideCamera::tertiary);
      for (const auto& d : dets) {
        int best = -1;
        double bestd = std::numeric_limits<double>::infinity();
        for (int pi = 0; pi < static_cast<int>(world_.plants.size()); ++pi) {
          const double dd =
              (world_.plants[pi].center - Vec2{d.world_point.x, d.world_point.y}).norm();
          if (dd < bestd) {
            bestd = dd;
            best = pi;
          }
        }
        if (best >= 0 && !visited_plants_.count(best)) {
          visited_plants_.insert(best);
          return true;
        }
      }
    }
    return false;
  }

  /// Terminal waypoint capture. Cascade: brake to rest, aim at the goal,
  /// drive straight with an exact-landing final tick, re-aim at the shrinking
  /// residual. Converges to fp precision with noiseless estimates and to the
  /// estimate noise floor otherwise.
  VelocityCommand dock_step(const RobotState& s, const Vec2& goal, double dt,
                            bool* advanced) {
    const double completion_tol =
        plan_.mode == NavMode::gps ? cfg_.dock_tol_gps : cfg_.dock_tol_map;
    const Vec2 pos{est_.x, est_.y};
    const double d = (goal - pos).norm();
    const bool stopped = std::abs(s.v) <= 1e-12 && std::abs(s.omega) <= 1e-12;

    // landing epsilon sits far below the waypoint metrics' resolution but
    // above the noise floor of the geo round trip
    const bool exact_landing = d <= 1e-7;
    const bool noise_floor =
        d <= completion_tol && d >= dock_.prev_dist && dock_.stage == DockState::Stage::drive;
    const bool timed_out =
        s.time - dock_.t_start > cfg_.dock_timeout && close_enough_for_advance(d);
    if (dock_.stage != DockState::Stage::align &&
        (exact_landing || noise_floor || timed_out)) {
      // position captured; face the next leg before moving on
      dock_.stage = DockState::Stage::align;
    }
    if (dock_.stage == DockState::Stage::align) {
      const double target = departure_yaw();
      const double aerr = std::abs(normalize_angle(target - est_.yaw));
      if (aerr <= 0.03 && std::abs(s.omega) <= 1e-9) {
        *advanced = true;
        return {0.0, 0.0};
      }
      return {0.0, rotate_command(normalize_angle(target - est_.yaw), s, dt)};
    }

    const double err =
        normalize_angle(std::atan2(goal.y - pos.y, goal.x - pos.x) - est_.yaw);
    // tighter aim as the residual shrinks; floor keeps fp convergence possible
    const double yaw_tol = clamp(0.02 * d, 1e-8, 1e-3);
    const double a = spec_.max_accel;
    const double alpha = spec_.max_yaw_accel;

    switch (dock_.stage) {
      case DockState::Stage::brake: {
        if (!stopped)
          return {std::max(0.0, s.v - a * dt),
                  s.omega > 0 ? std::max(0.0, s.omega - alpha * dt)
                              : std::min(0.0, s.omega + alpha * dt)};
        dock_.stage = DockState::Stage::rotate;
        dock_.prev_err = std::numeric_limits<double>::infinity();
        [[fallthrough]];
      }
      case DockState::Stage::rotate: {
        const double aerr = std::abs(err);
        const bool jitter_floor = aerr >= dock_.prev_err && aerr <= 0.05;
        if (aerr > yaw_tol && !jitter_floor) {
          dock_.prev_err = aerr;
          return {0.0, rotate_command(err, s, dt)};
        }
        if (std::abs(s.omega) > 1e-12)
          return {0.0, s.omega > 0 ? std::max(0.0, s.omega - alpha * dt)
                                   : std::min(0.0, s.omega + alpha * dt)};
        dock_.stage = DockState::Stage::drive;
        dock_.prev_dist = std::numeric_limits<double>::infinity();
        [[fallthrough]];
      }
      case DockState::Stage::drive: {
        if ((std::abs(err) > std::max(0.3, 100.0 * yaw_tol) && d > completion_tol) ||
            (d > dock_.prev_dist * 1.5 && d > completion_tol)) {
          dock_.stage = DockState::Stage::brake;  // overshoot or moved estimate
          return {std::max(0.0, s.v - a * dt), 0.0};
        }
        dock_.prev_dist = std::min(dock_.prev_dist, d);
        const double v_lo = std::max(0.0, s.v - a * dt);
        const double v_hi = std::min(cfg_.cruise_speed, s.v + a * dt);
        const double v_land_max = a * dt;  // stoppable next tick
        const double v_direct = d / dt;
        if (v_direct >= v_lo && v_direct <= std::min(v_hi, v_land_max))
          return {v_direct, 0.0};  // exact landing tick
        const double d_stop = v_land_max * dt;
        const double v_profile = std::sqrt(a * std::max(d - d_stop, 0.0));
        return {clamp(v_profile, v_lo, v_hi), 0.0};
      }
    }
    return {0.0, 0.0};
  }

  bool close_enough_for_advance(double dist_est) const {
    if (phase_ == MissionPhase::return_home) return dist_est <= cfg_.map_threshold;
    return reached(waypoint_index_);
  }

  /// Heading of the leg leaving the current goal.
  double departure_yaw() const {
    if (phase_ == MissionPhase::return_home) return plan_.home.yaw;
    const int next = waypoint_index_ + 1;
    if (next < static_cast<int>(plan_.size())) {
      const Vec2 cur = goal_map_point(waypoint_index_);
      const Vec2 nxt = goal_map_point(next);
      if ((nxt - cur).norm() > 1e-9)
        return std::atan2(nxt.y - cur.y, nxt.x - cur.x);
    }
    return est_.yaw;
  }

  /// Accel-limited in-place rotation toward err, with a stoppable exact
  /// landing tick and a braking envelope against overshoot.
  double rotate_command(double err, const RobotState& s, double dt) const {
    const double alpha = spec_.max_yaw_accel;
    const double w_lo = std::max(-spec_.max_yaw_rate, s.omega - alpha * dt);
    const double w_hi = std::min(spec_.max_yaw_rate, s.omega + alpha * dt);
    const double w_land_max = alpha * dt;
    const double direct = err / dt;
    if (direct >= w_lo && direct <= w_hi && std::abs(direct) <= w_land_max)
      return direct;
    const double mag =
        std::min(std::sqrt(alpha * std::max(std::abs(err) - w_land_max * dt, 0.0)),
                 spec_.max_yaw_rate);
    return clamp(std::copysign(mag, err), w_lo, w_hi);
  }

  VelocityCommand drive_step(const RobotState& true_state, const Vec2& goal, double dt,
                             MissionTick* out) {
    const Costmap* cm = nullptr;
    std::vector<Vec2> path;
    if (plan_.mode == NavMode::map) {
      cm = &global_costmap_;
      path = reference_path(goal, out);
      if (path.empty()) {
        out->flagged = true;  // no global path this tick; safe stop, retry
        return {0.0, 0.0};
      }
    } else {
      build_local_costmap(true_state);
      cm = &local_costmap_;
      path = gps_reference({est_.x, est_.y}, goal);
    }

    RobotState est_state = true_state;
    est_state.x = est_.x;
    est_state.y = est_.y;
    est_state.yaw = est_.yaw;
    DwaResult dwa = plan_local_dwa(est_state, path, *cm, dwa_cfg_, dwa_spec_);
    if (dwa.recovery) out->flagged = true;

    VelocityCommand cmd{dwa.v, dwa.omega};

    // (c) visual correction override inside the rows
    if (phase_ == MissionPhase::row_following) {
      const double w_cap = deg2rad(sensors_.guidance.max_angle_deg) / dt;
      if (tick_ % cfg_.vision_stride == 0) {
        const Pose3 cam = mount_pose_world(true_state, find_mount("primary_camera"));
        const SegMaskFrame frame =
            render_segmentation(world_, cam, sensors_.guidance_camera);
        const GuidanceResult g = guidance_from_frame(frame, sensors_.guidance);
        last_guidance_ = g;
        out->frame_rendered = true;
        out->sky_ground = g.sky_ground;
      }
      out->correction_deg = last_guidance_.steer.angle_deg;
      out->guidance_confidence = last_guidance_.steer.confidence;
      if (last_guidance_.steer.confidence == GuidanceConfidence::full)
        cmd.omega = clamp(deg2rad(last_guidance_.steer.angle_deg) / dt, -w_cap, w_cap);
      cmd.omega = clamp(cmd.omega, -w_cap, w_cap);
    }
    return cmd;
  }

  /// GPS-mode reference: straight when the leg stays clear of the planted
  /// block or inside one corridor band; otherwise detour through the nearer
  /// headland the way the serpentine plan does.
  std::vector<Vec2> gps_reference(const Vec2& pos, const Vec2& goal) const {
    const FarmConfig& farm = world_.config;
    const double L = farm.row_length();
    const double pad = farm.plant_width / 2.0 + 0.4;
    const Rect block{{farm.origin.x - pad, farm.origin.y - pad},
                     {farm.origin.x + L + pad,
                      farm.origin.y + (farm.n_rows - 1) * farm.row_spacing + pad}};

    auto segment_hits_block = [&](const Vec2& a, const Vec2& b) {
      // conservative sampling; legs are a few meters long
      const int n = std::max(2, static_cast<int>((b - a).norm() / 0.1));
      for (int i = 0; i <= n; ++i) {
        const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
        if (block.contains(p)) return true;
      }
      return false;
    };
    if (!segment_hits_block(pos, goal)) return {pos, goal};

    const double yc_pos = nearest_corridor_centerline(pos.y, farm);
    const double yc_goal = nearest_corridor_centerline(goal.y, farm);
    const bool same_corridor = yc_pos == yc_goal && std::abs(pos.y - yc_pos) <= 0.55 &&
                               std::abs(goal.y - yc_goal) <= 0.55;
    if (same_corridor) return {pos, goal};

    const double hx_lo = farm.origin.x - 1.5;
    const double hx_hi = farm.origin.x + L + 1.5;
    const double cost_lo = std::abs(pos.x - hx_lo) + std::abs(goal.x - hx_lo);
    const double cost_hi = std::abs(pos.x - hx_hi) + std::abs(goal.x - hx_hi);
    const double hx = cost_lo <= cost_hi ? hx_lo : hx_hi;
    return {pos, {hx, pos.y}, {hx, goal.y}, goal};
  }

  std::vector<Vec2> reference_path(const Vec2& goal, MissionTick* out) {
    const Vec2 pos{est_.x, est_.y};
    const bool goal_changed = (goal - path_goal_).norm() > 1e-9;
    const bool stale = path_.empty() || goal_changed ||
                       distance_to_path(pos) > 1.0 ||
                       tick_ - path_tick_ > static_cast<int>(2.0 * cfg_.control_rate);
    if (stale) {
      try {
        PathPlan plan = plan_global(global_costmap_, pos, goal);
        path_.clear();
        for (std::size_t i = 0; i < plan.points.size(); i += 5)
          path_.push_back(plan.points[i]);
        if (path_.empty() || (path_.back() - plan.points.back()).norm() > 1e-9)
          path_.push_back(plan.points.back());
        path_goal_ = goal;
        path_tick_ = tick_;
      } catch (const NoPathError&) {
        path_.clear();
        return {};
      } catch (const InvalidEndpointError&) {
        path_.clear();
        return {};
      }
    }
    return path_;
  }

  double distance_to_path(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& q : path_) best = std::min(best, (p - q).norm());
    return best;
  }

  void build_local_costmap(const RobotState& true_state) {
    const double half = 6.0;
    const GridGeom geom = grid_covering({est_.x - half, est_.y - half},
                                        {est_.x + half, est_.y + half}, 0.05);
    TernaryMap local(geom);
    for (auto& c : local.cells) c = CellState::free;
    const Pose3 sensor = mount_pose_world(true_state, sensors_.lidar.mount);
    // endpoints computed in the estimate frame so control is consistent
    const double yaw_err = est_.yaw - true_state.yaw;
    const Vec2 sensor_est =
        Vec2{est_.x, est_.y} +
        rotate({sensor.position.x - true_state.x, sensor.position.y - true_state.y},
               yaw_err);
    const double sensor_yaw = sensor.yaw() + yaw_err;
    bool any = false;
    for (std::size_t i = 0; i < last_scan_.ranges.size(); ++i) {
      const double r = last_scan_.ranges[i];
      if (r >= last_scan_.max_range - 1e-9) continue;
      const double a = sensor_yaw + last_scan_.angles[i];
      const Vec2 end = sensor_est + Vec2{std::cos(a), std::sin(a)} * r;
      const CellIndex c = geom.world_to_cell(end);
      if (geom.in_bounds(c)) {
        local.cells[geom.index(c)] = CellState::occupied;
        any = true;
      }
    }
    InflationParams params = inflation_;
    params.unknown_is_lethal = false;
    if (any) {
      local_costmap_ = inflate(local, params);
    } else {
      local_costmap_.geom = geom;
      local_costmap_.params = params;
      local_costmap_.cost.assign(geom.size(), 0);
    }
  }

  const FarmWorld& world_;
  WaypointPlan plan_;
  MissionConfig cfg_;
  RobotSpec spec_;
  RobotSpec dwa_spec_;
  MissionSensorConfig sensors_;
  LocalizationConfig loc_cfg_;
  InflationParams inflation_;
  DwaConfig dwa_cfg_;

  RngStream lidar_rng_;
  GpsSimulator gps_sim_;
  RngStream imu_rng_;
  RngStream odom_rng_;
  RngStream pf_rng_;

  TernaryMap map_{GridGeom{}};
  LikelihoodField field_;
  Costmap global_costmap_;
  Costmap local_costmap_;
  std::vector<Particle> particles_;
  Pose2 lidar_offset_;
  std::vector<Vec2> gps_goal_map_;

  Pose2 est_;
  GpsFix last_fix_;
  LidarScan last_scan_;
  GuidanceResult last_guidance_;
  MissionPhase phase_ = MissionPhase::idle;
  MissionPhase resume_phase_ = MissionPhase::navigate_to_waypoint;
  int waypoint_index_ = 0;
  int tick_ = 0;
  double boll_dwell_end_ = 0.0;
  DockState dock_;
  std::vector<Vec2> path_;
  Vec2 path_goal_{1e30, 1e30};
  int path_tick_ = -1000000;
  std::set<int> visited_plants_;
};

}  // namespace rowsim
