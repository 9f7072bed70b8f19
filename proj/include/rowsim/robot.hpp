#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rowsim/math.hpp"

namespace rowsim {

struct RobotSpec {
  double length = 0.990;  // m
  double width = 0.670;   // m
  double height = 0.390;  // m
  double max_speed = 1.0;       // m/s
  double max_yaw_rate = 2.0;    // rad/s
  double max_accel = 1.0;       // m/s^2
  double max_yaw_accel = 2.0;   // rad/s^2
  double cruise_speed = 0.5;    // m/s (1.8 km/h)

  void validate() const {
    if (length <= 0 || width <= 0 || height <= 0 || max_speed <= 0 ||
        max_yaw_rate <= 0 || max_accel <= 0 || max_yaw_accel <= 0 || cruise_speed <= 0)
      throw std::invalid_argument("robot: all spec values must be positive");
    if (cruise_speed > max_speed)
      throw std::invalid_argument("robot: cruise_speed exceeds max_speed");
  }
};

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;      // radians, (-pi, pi]
  double v = 0.0;        // m/s
  double omega = 0.0;    // rad/s
  double battery = 100;  // percent
  double time = 0.0;     // seconds
};

struct VelocityCommand {
  double v = 0.0;
  double omega = 0.0;
};

/// Clamp a command to speed and acceleration limits relative to the current state.
inline VelocityCommand clamp_command(const RobotState& s, const VelocityCommand& cmd,
                                     double dt, const RobotSpec& spec) {
  VelocityCommand out;
  out.v = clamp(cmd.v, -spec.max_speed, spec.max_speed);
  out.v = clamp(out.v, s.v - spec.max_accel * dt, s.v + spec.max_accel * dt);
  out.omega = clamp(cmd.omega, -spec.max_yaw_rate, spec.max_yaw_rate);
  out.omega = clamp(out.omega, s.omega - spec.max_yaw_accel * dt,
                    s.omega + spec.max_yaw_accel * dt);
  return out;
}

/// Exact unicycle arc step (constant twist over dt). Straight-line limit for
/// small |omega| keeps the arc formula well conditioned.
inline RobotState step_kinematics(const RobotState& state, const VelocityCommand& cmd,
                                  double dt, const RobotSpec& spec) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (!std::isfinite(state.x) || !std::isfinite(state.y) || !std::isfinite(state.yaw) ||
      !std::isfinite(cmd.v) || !std::isfinite(cmd.omega))
    throw std::invalid_argument("non-finite robot state or command");

  const VelocityCommand c = clamp_command(state, cmd, dt, spec);
  RobotState next = state;
  next.v = c.v;
  next.omega = c.omega;
  if (std::abs(c.omega) < 1e-9) {
    next.x = state.x + c.v * dt * std::cos(state.yaw);
    next.y = state.y + c.v * dt * std::sin(state.yaw);
    next.yaw = normalize_angle(state.yaw + c.omega * dt);
  } else {
    const double r = c.v / c.omega;
    const double yaw1 = state.yaw + c.omega * dt;
    next.x = state.x + r * (std::sin(yaw1) - std::sin(state.yaw));
    next.y = state.y - r * (std::cos(yaw1) - std::cos(state.yaw));
    next.yaw = normalize_angle(yaw1);
  }
  next.time = state.time + dt;
  return next;
}

/// Linear discharge, clamped at zero.
inline RobotState step_battery(const RobotState& state, double dt,
                               double discharge_rate_pct_per_s) {
  if (discharge_rate_pct_per_s < 0.0)
    throw std::invalid_argument("discharge rate must be >= 0");
  RobotState next = state;
  next.battery = std::max(0.0, state.battery - discharge_rate_pct_per_s * dt);
  return next;
}

// Battery default: 100% -> 40% over 2.4 h of simulated operation.
inline constexpr double kDefaultBatteryRate = 60.0 / (2.4 * 3600.0);

/// Component pose relative to the top-plate frame (positions m, angles deg).
struct MountPose {
  std::string id;
  double x = 0, y = 0, z = 0;
  double roll_deg = 0, pitch_deg = 0, yaw_deg = 0;
};

// Top plate relative to the robot base frame.
inline constexpr double kTopPlateOffsetX = 0.081;
inline constexpr double kTopPlateOffsetZ = 0.245;

/// Fixed component registry (positions on the physical platform).
inline const std::vector<MountPose>& mount_registry() {
  static const std::vector<MountPose> reg = {
      {"primary_camera", 0.415, 0.000, 0.095, 0, 5, 0},
      {"secondary_camera", -0.070, 0.300, -0.050, 0, -15, 90},
      {"tertiary_camera", -0.070, -0.300, -0.050, 0, -15, -90},
      {"lidar", 0.430, -0.125, 0.000, 0, 0, 90},
      {"imu", 0.109, 0.000, -0.096, 0, -90, 180},
      {"gps", -0.354, 0.190, 0.513, 0, 0, 0},
      {"ur5e_arm_base", 0.264, 0.000, 0.006, 0, 0, -90},
      {"base_plate_center", -0.081, 0.000, -0.245, 0, 0, 0},
  };
  return reg;
}

inline const MountPose& find_mount(std::string_view id) {
  for (const auto& m : mount_registry())
    if (m.id == id) return m;
  throw std::out_of_range("unknown robot component id: " + std::string(id));
}

/// World pose of a mounted component: base pose -> top plate -> mount.
inline Pose3 mount_pose_world(const RobotState& state, const MountPose& mount) {
  const Mat3 base_rot = rot_z(state.yaw);
  const Vec3 plate_in_base{kTopPlateOffsetX, 0.0, kTopPlateOffsetZ};
  const Vec3 mount_in_base = plate_in_base + Vec3{mount.x, mount.y, mount.z};
  Pose3 out;
  out.position = Vec3{state.x, state.y, 0.0} + base_rot * mount_in_base;
  out.rotation = base_rot * rot_zyx(deg2rad(mount.roll_deg), deg2rad(mount.pitch_deg),
                                    deg2rad(mount.yaw_deg));
  return out;
}

}  // namespace rowsim
