#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "rowsim/geo.hpp"
#include "rowsim/math.hpp"
#include "rowsim/rng.hpp"
#include "rowsim/robot.hpp"
#include "rowsim/world.hpp"

namespace rowsim {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains_open(double v) const { return v > lo && v < hi; }
};

struct LidarSpec {
  int beam_count = 720;
  double fov = 2.0 * kPi;     // radians
  double max_range = 30.0;    // m
  MountPose mount = find_mount("lidar");
  Interval self_filter_y{-10.0, 0.0};  // sensor frame, m
  Interval self_filter_z{0.0, 0.5};    // sensor frame, m
  double noise_sigma = 0.0;   // m
  double canopy_mfp = 0.0;    // m; 0 = exact surface returns

  void validate() const {
    if (beam_count < 1) throw std::invalid_argument("lidar: beam_count >= 1");
    if (max_range <= 0) throw std::invalid_argument("lidar: max_range > 0");
    if (self_filter_y.lo > self_filter_y.hi || self_filter_z.lo > self_filter_z.hi)
      throw std::invalid_argument("lidar: self-filter intervals ill-ordered");
  }
};

struct LidarScan {
  std::vector<double> angles;  // sensor frame, radians
  std::vector<double> ranges;  // m; max_range marks no-return
  double max_range = 30.0;
  double timestamp = 0.0;
};

/// True if a sensor-frame point falls inside the self-filter box.
inline bool self_filter_contains(const LidarSpec& spec, const Vec3& p_sensor) {
  return spec.self_filter_y.contains_open(p_sensor.y) &&
         spec.self_filter_z.contains_open(p_sensor.z);
}

/// Planar ring scan at the lidar mount height. Cotton returns optionally
/// scatter into the canopy with exponential mean free path canopy_mfp; beams
/// whose sampled depth exceeds the chord pass through to the next surface.
inline LidarScan simulate_lidar(const FarmWorld& world, const RobotState& state,
                                const LidarSpec& spec, RngStream& rng) {
  spec.validate();
  const Pose3 sensor = mount_pose_world(state, spec.mount);
  const double sensor_yaw = sensor.yaw();
  LidarScan scan;
  scan.max_range = spec.max_range;
  scan.timestamp = state.time;
  scan.angles.reserve(spec.beam_count);
  scan.ranges.reserve(spec.beam_count);

  const double eps_advance = 1e-7;
  for (int i = 0; i < spec.beam_count; ++i) {
    const double a = -spec.fov / 2.0 + spec.fov * i / spec.beam_count;
    scan.angles.push_back(a);
    const double wa = sensor_yaw + a;
    const Vec3 dir{std::cos(wa), std::sin(wa), 0.0};

    double range = spec.max_range;
    Vec3 hit_point = sensor.position + dir * spec.max_range;
    Vec3 origin = sensor.position;
    double travelled = 0.0;
    for (int bounce = 0; bounce < 16; ++bounce) {
      const RayHit h = cast_ray(world, origin, dir, spec.max_range - travelled);
      if (h.surface == SurfaceClass::sky) break;
      if (h.surface == SurfaceClass::ground) {
        range = travelled + h.range;
        hit_point = h.point;
        break;
      }
      // cotton
      if (spec.canopy_mfp <= 0.0) {
        range = travelled + h.range;
        hit_point = h.point;
        break;
      }
      // entry point; find chord by casting from just inside
      const Vec3 inside = origin + dir * (h.range + eps_advance);
      const RayHit exit = cast_ray(world, inside, dir, spec.max_range);
      const double chord =
          exit.surface == SurfaceClass::cotton ? exit.range + eps_advance : 0.0;
      double u = rng.next_double();
      while (u >= 1.0) u = rng.next_double();
      const double depth = -spec.canopy_mfp * std::log(1.0 - u);
      if (chord <= 0.0 || depth <= chord) {
        range = travelled + h.range + std::min(depth, std::max(chord, 0.0));
        hit_point = origin + dir * (h.range + std::min(depth, std::max(chord, 0.0)));
        break;
      }
      travelled += h.range + chord;
      origin = origin + dir * (h.range + chord);
      if (travelled >= spec.max_range) break;
    }

    if (range < spec.max_range && spec.noise_sigma > 0.0) {
      range += rng.gaussian(0.0, spec.noise_sigma);
      range = clamp(range, 1e-6, spec.max_range);
      hit_point = sensor.position + dir * range;
    }
    if (range < spec.max_range) {
      const Vec3 p_sensor = sensor.rotation.transposed() * (hit_point - sensor.position);
      if (self_filter_contains(spec, p_sensor)) range = spec.max_range;
    }
    scan.ranges.push_back(range);
  }
  return scan;
}

struct GpsFix {
  double lat = 0.0;
  double lon = 0.0;
  double timestamp = 0.0;
};

struct GpsNoiseModel {
  double white_sigma_deg = 0.0;
  double drift_step_sigma_deg = 0.0;  // random-walk std growth per sqrt(second)
};

/// GPS with white noise plus a random-walk drift updated per sample interval.
class GpsSimulator {
 public:
  GpsSimulator(const GpsNoiseModel& model, RngStream rng) : model_(model), rng_(rng) {}

  GpsFix sample(const RobotState& state, const geo::GeoAnchor& anchor, double dt) {
    if (model_.drift_step_sigma_deg > 0.0 && dt > 0.0) {
      const double s = model_.drift_step_sigma_deg * std::sqrt(dt);
      drift_lat_ += rng_.gaussian(0.0, s);
      drift_lon_ += rng_.gaussian(0.0, s);
    }
    const geo::GeoPoint p = geo::map_to_gps(state.x, state.y, anchor);
    GpsFix fix;
    fix.lat = p.lat + drift_lat_;
    fix.lon = p.lon + drift_lon_;
    if (model_.white_sigma_deg > 0.0) {
      fix.lat += rng_.gaussian(0.0, model_.white_sigma_deg);
      fix.lon += rng_.gaussian(0.0, model_.white_sigma_deg);
    }
    fix.timestamp = state.time;
    return fix;
  }

  Vec2 drift() const { return {drift_lat_, drift_lon_}; }

 private:
  GpsNoiseModel model_;
  RngStream rng_;
  double drift_lat_ = 0.0;
  double drift_lon_ = 0.0;
};

struct ImuReading {
  double yaw = 0.0;
  double yaw_rate = 0.0;
  double timestamp = 0.0;
};

struct ImuNoiseModel {
  double yaw_sigma = 0.0;
  double yaw_rate_sigma = 0.0;
};

inline ImuReading simulate_imu(const RobotState& state, const ImuNoiseModel& noise,
                               RngStream& rng) {
  ImuReading r;
  r.yaw = normalize_angle(state.yaw + (noise.yaw_sigma > 0.0
                                           ? rng.gaussian(0.0, noise.yaw_sigma)
                                           : 0.0));
  r.yaw_rate = state.omega + (noise.yaw_rate_sigma > 0.0
                                  ? rng.gaussian(0.0, noise.yaw_rate_sigma)
                                  : 0.0);
  r.timestamp = state.time;
  return r;
}

/// Body-frame displacement between two states.
struct OdomDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;
};

struct OdomNoiseModel {
  double scale_sigma = 0.0;      // multiplicative, per component
  double trans_add_sigma = 0.0;  // m
  double rot_add_sigma = 0.0;    // rad
};

inline OdomDelta simulate_odometry(const RobotState& prev, const RobotState& next,
                                   const OdomNoiseModel& noise, RngStream& rng) {
  const Vec2 d = rotate({next.x - prev.x, next.y - prev.y}, -prev.yaw);
  OdomDelta out{d.x, d.y, normalize_angle(next.yaw - prev.yaw)};
  const bool moved = std::abs(out.dx) > 0 || std::abs(out.dy) > 0 || std::abs(out.dyaw) > 0;
  if (!moved) return {0.0, 0.0, 0.0};
  if (noise.scale_sigma > 0.0) {
    out.dx *= 1.0 + rng.gaussian(0.0, noise.scale_sigma);
    out.dy *= 1.0 + rng.gaussian(0.0, noise.scale_sigma);
    out.dyaw *= 1.0 + rng.gaussian(0.0, noise.scale_sigma);
  }
  if (noise.trans_add_sigma > 0.0) {
    out.dx += rng.gaussian(0.0, noise.trans_add_sigma);
    out.dy += rng.gaussian(0.0, noise.trans_add_sigma);
  }
  if (noise.rot_add_sigma > 0.0) out.dyaw += rng.gaussian(0.0, noise.rot_add_sigma);
  return out;
}

struct CameraIntrinsics {
  int width = 640;
  int height = 480;
  double hfov_deg = 69.0;
  double vfov_deg = 42.0;
  double fps = 24.0;

  double fx() const { return (width / 2.0) / std::tan(deg2rad(hfov_deg) / 2.0); }
  double fy() const { return (height / 2.0) / std::tan(deg2rad(vfov_deg) / 2.0); }
  double cx() const { return (width - 1) / 2.0; }
  double cy() const { return (height - 1) / 2.0; }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("camera: pixel dims must be > 0");
    if (hfov_deg <= 0 || hfov_deg >= 180 || vfov_deg <= 0 || vfov_deg >= 180)
      throw std::invalid_argument("camera: FOV must be in (0, 180)");
  }
};

struct SegMaskFrame {
  int width = 0;
  int height = 0;
  std::vector<SurfaceClass> labels;  // row-major
  double timestamp = 0.0;

  SurfaceClass at(int u, int v) const {
    return labels[static_cast<std::size_t>(v) * width + u];
  }
  SurfaceClass& at(int u, int v) {
    return labels[static_cast<std::size_t>(v) * width + u];
  }
};

/// Camera-frame ray for pixel (u, v): +x forward, +y left, +z up.
inline Vec3 pixel_ray(const CameraIntrinsics& cam, double u, double v) {
  return Vec3{1.0, -(u - cam.cx()) / cam.fx(), -(v - cam.cy()) / cam.fy()}.normalized();
}

/// Perfect-label segmentation oracle: one ray cast per pixel.
inline SegMaskFrame render_segmentation(const FarmWorld& world, const Pose3& camera,
                                        const CameraIntrinsics& cam,
                                        double max_range = 2000.0) {
  cam.validate();
  SegMaskFrame f;
  f.width = cam.width;
  f.height = cam.height;
  f.labels.resize(static_cast<std::size_t>(cam.width) * cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 dir = camera.rotation * pixel_ray(cam, u, v);
      f.at(u, v) = cast_ray(world, camera.position, dir, max_range).surface;
    }
  }
  return f;
}

/// Random label flips, rate in [0, 1]; used only to stress the guidance law.
inline void corrupt_mask(SegMaskFrame& f, double flip_rate, RngStream& rng) {
  if (flip_rate <= 0.0) return;
  for (auto& l : f.labels) {
    if (rng.next_double() < flip_rate) {
      const int cur = static_cast<int>(l);
      l = static_cast<SurfaceClass>((cur + 1 + (rng.next_u64() & 1)) % 3);
    }
  }
}

struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
};

enum class SideCamera { secondary, tertiary };

struct BollDetection {
  PixelBox bbox;
  SideCamera source = SideCamera::secondary;
  Vec3 world_point;
};

/// Bolls that project into the frustum and are unoccluded (first world hit
/// within 5 cm of the boll) become fixed-size detections.
inline std::vector<BollDetection> detect_bolls(const FarmWorld& world,
                                               const Pose3& camera,
                                               const CameraIntrinsics& cam,
                                               SideCamera source,
                                               int bbox_px = 20) {
  cam.validate();
  std::vector<BollDetection> out;
  const Mat3 world_to_cam = camera.rotation.transposed();
  for (const auto& plant : world.plants) {
    for (const auto& boll : plant.boll_points) {
      const Vec3 rel = boll - camera.position;
      const Vec3 pc = world_to_cam * rel;
      if (pc.x <= 1e-6) continue;
      const double u = cam.cx() - cam.fx() * (pc.y / pc.x);
      const double v = cam.cy() - cam.fy() * (pc.z / pc.x);
      if (u < 0 || u > cam.width - 1 || v < 0 || v > cam.height - 1) continue;
      const double dist = rel.norm();
      const RayHit h = cast_ray(world, camera.position, rel * (1.0 / dist), dist + 1.0);
      if (!std::isfinite(h.range) || (h.point - boll).norm() > 0.05) continue;
      BollDetection det;
      det.source = source;
      det.world_point = boll;
      const int ui = static_cast<int>(std::lround(u));
      const int vi = static_cast<int>(std::lround(v));
      det.bbox = {std::max(0, ui - bbox_px / 2), std::max(0, vi - bbox_px / 2),
                  std::min(cam.width - 1, ui + bbox_px / 2),
                  std::min(cam.height - 1, vi + bbox_px / 2)};
      out.push_back(det);
    }
  }
  return out;
}

/// Debug export: PGM-style text grid of class integers.
inline void export_mask_pgm(const SegMaskFrame& f, std::ostream& os) {
  os << "P2\n" << f.width << " " << f.height << "\n2\n";
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      os << static_cast<int>(f.at(u, v));
      os << (u + 1 == f.width ? '\n' : ' ');
    }
  }
}

}  // namespace rowsim
