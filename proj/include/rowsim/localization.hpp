#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rowsim/grid.hpp"
#include "rowsim/math.hpp"
#include "rowsim/rng.hpp"
#include "rowsim/sensors.hpp"

namespace rowsim {

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double weight = 0.0;
};

/// Distance-based sensor model: floor + (1-floor) * exp(-d^2 / 2 sigma^2),
/// with d the exact Euclidean distance to the nearest occupied cell.
struct LikelihoodField {
  GridGeom geom;
  std::vector<double> values;
  double sigma = 0.2;
  double floor_prob = 0.05;

  double at_world(const Vec2& p) const {
    const CellIndex c = geom.world_to_cell(p);
    if (!geom.in_bounds(c)) return floor_prob;
    return values[geom.index(c)];
  }
};

namespace detail {

/// Felzenszwalb-Huttenlocher exact 1D squared distance transform.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  d.assign(n, 0.0);
  std::vector<int> v(n, 0);
  std::vector<double> z(n + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

/// Exact squared EDT (cell units) from the occupied set of a ternary map.
inline std::vector<double> squared_edt(const TernaryMap& map) {
  const int w = map.geom.width, h = map.geom.height;
  const double inf = 1e18;
  std::vector<double> dist(map.geom.size());
  for (std::size_t i = 0; i < dist.size(); ++i)
    dist[i] = map.cells[i] == CellState::occupied ? 0.0 : inf;
  std::vector<double> col(h), out(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = dist[map.geom.index(x, y)];
    edt_1d(col, out);
    for (int y = 0; y < h; ++y) dist[map.geom.index(x, y)] = out[y];
  }
  std::vector<double> row(w), rout(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = dist[map.geom.index(x, y)];
    edt_1d(row, rout);
    for (int x = 0; x < w; ++x) dist[map.geom.index(x, y)] = rout[x];
  }
  return dist;
}

}  // namespace detail

inline LikelihoodField build_likelihood_field(const TernaryMap& map, double sigma,
                                              double floor_prob) {
  if (sigma <= 0.0) throw std::invalid_argument("likelihood sigma must be > 0");
  if (floor_prob < 0.0 || floor_prob >= 1.0)
    throw std::invalid_argument("likelihood floor must be in [0, 1)");
  const bool any_occ =
      std::any_of(map.cells.begin(), map.cells.end(),
                  [](CellState c) { return c == CellState::occupied; });
  if (!any_occ)
    throw std::runtime_error("likelihood field undefined: map has no occupied cell");

  LikelihoodField field;
  field.geom = map.geom;
  field.sigma = sigma;
  field.floor_prob = floor_prob;
  field.values.resize(map.geom.size());
  const std::vector<double> d2 = detail::squared_edt(map);
  const double res2 = map.geom.resolution * map.geom.resolution;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    const double dm2 = d2[i] * res2;
    field.values[i] = floor_prob + (1.0 - floor_prob) * std::exp(-dm2 / (2.0 * sigma * sigma));
  }
  return field;
}

/// Odometry motion model parameters (rot/trans mixing alphas).
struct MotionNoise {
  double a1 = 0.08;  // rot from rot
  double a2 = 0.02;  // rot from trans
  double a3 = 0.04;  // trans from trans
  double a4 = 0.02;  // trans from rot
};

/// Sample-based propagation of each particle by the body-frame odometry delta.
inline void predict(std::vector<Particle>& particles, const OdomDelta& delta,
                    const MotionNoise& noise, RngStream& rng) {
  const double trans = std::hypot(delta.dx, delta.dy);
  const double rot1 = trans > 1e-9 ? std::atan2(delta.dy, delta.dx) : 0.0;
  const double rot2 = normalize_angle(delta.dyaw - rot1);
  const double s_rot1 = std::sqrt(noise.a1 * rot1 * rot1 + noise.a2 * trans * trans);
  const double s_trans =
      std::sqrt(noise.a3 * trans * trans + noise.a4 * (rot1 * rot1 + rot2 * rot2));
  const double s_rot2 = std::sqrt(noise.a1 * rot2 * rot2 + noise.a2 * trans * trans);
  for (auto& p : particles) {
    const double r1 = rot1 + (s_rot1 > 0 ? rng.gaussian(0.0, s_rot1) : 0.0);
    const double tr = trans + (s_trans > 0 ? rng.gaussian(0.0, s_trans) : 0.0);
    const double r2 = rot2 + (s_rot2 > 0 ? rng.gaussian(0.0, s_rot2) : 0.0);
    p.x += tr * std::cos(p.yaw + r1);
    p.y += tr * std::sin(p.yaw + r1);
    p.yaw = normalize_angle(p.yaw + r1 + r2);
  }
}

struct DegenerateFilterError : std::runtime_error {
  DegenerateFilterError() : std::runtime_error("particle filter degenerate: all weights zero") {}
};

/// Likelihood-field weight update over a fixed beam subsample; log-domain
/// accumulation, then normalized. Max-range beams are skipped. The sensor
/// offset is the lidar pose in the robot base frame.
inline void update_weights(std::vector<Particle>& particles, const LidarScan& scan,
                           const LikelihoodField& field, int beam_subsample,
                           const Pose2& sensor_offset) {
  if (beam_subsample < 1) throw std::invalid_argument("beam_subsample >= 1");
  if (particles.empty()) throw std::invalid_argument("no particles");
  const std::size_t total = scan.ranges.size();
  const std::size_t stride = std::max<std::size_t>(1, total / beam_subsample);

  std::vector<double> logw(particles.size(), 0.0);
  for (std::size_t pi = 0; pi < particles.size(); ++pi) {
    const Particle& p = particles[pi];
    const Vec2 sensor_pos =
        Vec2{p.x, p.y} + rotate({sensor_offset.x, sensor_offset.y}, p.yaw);
    const double sensor_yaw = p.yaw + sensor_offset.yaw;
    double acc = 0.0;
    for (std::size_t b = 0; b < total; b += stride) {
      const double range = scan.ranges[b];
      if (range >= scan.max_range - 1e-9) continue;
      const double wa = sensor_yaw + scan.angles[b];
      const Vec2 end = sensor_pos + Vec2{std::cos(wa), std::sin(wa)} * range;
      acc += std::log(field.at_world(end));
    }
    logw[pi] = acc;
  }
  double maxlw = -std::numeric_limits<double>::infinity();
  for (std::size_t pi = 0; pi < particles.size(); ++pi) {
    logw[pi] += std::log(std::max(particles[pi].weight, 1e-300));
    maxlw = std::max(maxlw, logw[pi]);
  }
  if (!std::isfinite(maxlw)) throw DegenerateFilterError();
  double sum = 0.0;
  for (std::size_t pi = 0; pi < particles.size(); ++pi) {
    particles[pi].weight = std::exp(logw[pi] - maxlw);
    sum += particles[pi].weight;
  }
  if (sum <= 0.0) throw DegenerateFilterError();
  for (auto& p : particles) p.weight /= sum;
}

inline double effective_sample_size(const std::vector<Particle>& particles) {
  double s2 = 0.0;
  for (const auto& p : particles) s2 += p.weight * p.weight;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

/// Low-variance (systematic) resampling core; output weights uniform.
inline std::vector<Particle> resample_systematic(const std::vector<Particle>& particles,
                                                 RngStream& rng) {
  const std::size_t n = particles.size();
  std::vector<Particle> out;
  out.reserve(n);
  const double u0 = rng.next_double() / n;
  double cum = particles[0].weight;
  std::size_t i = 0;
  for (std::size_t m = 0; m < n; ++m) {
    const double u = u0 + static_cast<double>(m) / n;
    while (u > cum && i + 1 < n) cum += particles[++i].weight;
    Particle p = particles[i];
    p.weight = 1.0 / n;
    out.push_back(p);
  }
  return out;
}

/// Resample only when N_eff drops below N/2.
inline void resample(std::vector<Particle>& particles, RngStream& rng) {
  if (particles.empty()) return;
  if (effective_sample_size(particles) < particles.size() / 2.0)
    particles = resample_systematic(particles, rng);
}

struct PoseEstimate {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double cov[3][3] = {};
};

/// Weighted mean pose; yaw via circular mean, covariance with wrapped yaw
/// residuals.
inline PoseEstimate estimate_pose(const std::vector<Particle>& particles) {
  if (particles.empty()) throw std::invalid_argument("no particles");
  double wsum = 0.0, mx = 0.0, my = 0.0, cs = 0.0, sn = 0.0;
  for (const auto& p : particles) {
    wsum += p.weight;
    mx += p.weight * p.x;
    my += p.weight * p.y;
    cs += p.weight * std::cos(p.yaw);
    sn += p.weight * std::sin(p.yaw);
  }
  if (wsum <= 0.0) throw std::invalid_argument("weights sum to zero");
  PoseEstimate e;
  e.x = mx / wsum;
  e.y = my / wsum;
  e.yaw = std::atan2(sn, cs);
  for (const auto& p : particles) {
    const double r[3] = {p.x - e.x, p.y - e.y, normalize_angle(p.yaw - e.yaw)};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) e.cov[i][j] += p.weight * r[i] * r[j] / wsum;
  }
  return e;
}

/// Gaussian cloud initializer used at mission start.
inline std::vector<Particle> init_particles(const Pose2& center, double pos_sigma,
                                            double yaw_sigma, int count,
                                            RngStream& rng) {
  std::vector<Particle> out(count);
  for (auto& p : out) {
    p.x = center.x + rng.gaussian(0.0, pos_sigma);
    p.y = center.y + rng.gaussian(0.0, pos_sigma);
    p.yaw = normalize_angle(center.yaw + rng.gaussian(0.0, yaw_sigma));
    p.weight = 1.0 / count;
  }
  return out;
}

}  // namespace rowsim
