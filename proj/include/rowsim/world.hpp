#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rowsim/geo.hpp"
#include "rowsim/grid.hpp"
#include "rowsim/math.hpp"
#include "rowsim/rng.hpp"

namespace rowsim {

enum class SurfaceClass : std::uint8_t { sky = 0, ground = 1, cotton = 2 };

struct FarmConfig {
  int n_rows = 9;
  int plants_per_row = 20;
  double row_spacing = 1.8;    // m, between adjacent row centerlines
  double plant_spacing = 0.7;  // m, between adjacent plants within a row
  double plant_height = 1.0;   // m
  double plant_width = 0.7;    // m, canopy diameter
  Vec2 origin;                 // map position of the first plant
  double friction_primary = 100.0;   // world metadata only, not simulated
  double friction_secondary = 50.0;  // world metadata only, not simulated
  int bolls_per_plant = 12;
  double bounds_margin = 3.0;
  std::uint64_t seed = 1;

  double row_length() const { return (plants_per_row - 1) * plant_spacing; }

  void validate() const {
    if (n_rows < 1 || plants_per_row < 1)
      throw std::invalid_argument("farm: counts must be >= 1");
    if (row_spacing <= 0 || plant_spacing <= 0 || plant_height <= 0 || plant_width <= 0)
      throw std::invalid_argument("farm: lengths must be > 0");
    if (row_spacing <= plant_width)
      throw std::invalid_argument("farm: row_spacing must exceed plant_width");
    if (bolls_per_plant < 0) throw std::invalid_argument("farm: bolls_per_plant < 0");
  }
};

struct PlantInstance {
  Vec2 center;
  double footprint_radius = 0.35;
  double height = 1.0;
  std::vector<Vec3> boll_points;
};

struct RayHit {
  SurfaceClass surface = SurfaceClass::sky;
  double range = std::numeric_limits<double>::infinity();
  Vec3 point;
};

/// The generated field. Rows run along map +x (the north-south axis under the
/// default anchor heading); row index grows toward +y. Immutable once built.
struct FarmWorld {
  FarmConfig config;
  std::vector<PlantInstance> plants;
  double ground_z = 0.0;
  geo::GeoAnchor geo_anchor;
  Rect bounds;

  // plant lookup buckets for ray casting (built by generate_farm)
  GridGeom bucket_geom;
  std::vector<std::vector<int>> buckets;

  const PlantInstance& plant(int row, int idx) const {
    return plants[static_cast<std::size_t>(row) * config.plants_per_row + idx];
  }
};

inline geo::GeoAnchor default_anchor() {
  // Farm anchored in north-east Mississippi; map +x points UTM north so the
  // rows run north-south and the home position sits at the field's SE corner.
  return geo::GeoAnchor::from_geo({33.4552, -88.7944}, kPi / 2.0);
}

inline FarmWorld generate_farm(const FarmConfig& config,
                               const geo::GeoAnchor& anchor = default_anchor()) {
  config.validate();
  FarmWorld w;
  w.config = config;
  w.geo_anchor = anchor;
  w.plants.reserve(static_cast<std::size_t>(config.n_rows) * config.plants_per_row);

  const double radius = config.plant_width / 2.0;
  for (int r = 0; r < config.n_rows; ++r) {
    for (int i = 0; i < config.plants_per_row; ++i) {
      PlantInstance p;
      p.center = {config.origin.x + i * config.plant_spacing,
                  config.origin.y + r * config.row_spacing};
      p.footprint_radius = radius;
      p.height = config.plant_height;
      RngStream rng = substream(config.seed, "bolls",
                                static_cast<std::uint64_t>(r) * config.plants_per_row + i);
      p.boll_points.reserve(config.bolls_per_plant);
      for (int b = 0; b < config.bolls_per_plant; ++b) {
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        const double z = rng.uniform(0.3 * config.plant_height, config.plant_height);
        p.boll_points.push_back({p.center.x + radius * std::cos(theta),
                                 p.center.y + radius * std::sin(theta), z});
      }
      w.plants.push_back(std::move(p));
    }
  }

  Vec2 lo{config.origin.x - radius, config.origin.y - radius};
  Vec2 hi{config.origin.x + config.row_length() + radius,
          config.origin.y + (config.n_rows - 1) * config.row_spacing + radius};
  w.bounds = {{lo.x - config.bounds_margin, lo.y - config.bounds_margin},
              {hi.x + config.bounds_margin, hi.y + config.bounds_margin}};

  // Bucket index: each plant registered in every bucket its disk overlaps.
  const double bucket_res = std::max(config.row_spacing, config.plant_spacing);
  w.bucket_geom = grid_covering(lo, hi, bucket_res, bucket_res);
  w.buckets.assign(w.bucket_geom.size(), {});
  for (int pi = 0; pi < static_cast<int>(w.plants.size()); ++pi) {
    const auto& p = w.plants[pi];
    const CellIndex c0 = w.bucket_geom.world_to_cell(
        {p.center.x - p.footprint_radius, p.center.y - p.footprint_radius});
    const CellIndex c1 = w.bucket_geom.world_to_cell(
        {p.center.x + p.footprint_radius, p.center.y + p.footprint_radius});
    for (int iy = c0.y; iy <= c1.y; ++iy)
      for (int ix = c0.x; ix <= c1.x; ++ix)
        if (w.bucket_geom.in_bounds(ix, iy))
          w.buckets[w.bucket_geom.index(ix, iy)].push_back(pi);
  }
  return w;
}

namespace detail {

struct CylinderHit {
  double t = std::numeric_limits<double>::infinity();
  int plant = -1;
};

/// First crossing of the solid finite cylinder: lateral surface with hit z in
/// [0, height], or the top/bottom caps.
inline double cylinder_entry_t(const PlantInstance& p, const Vec3& o, const Vec3& d,
                               double ground_z, double t_min, double t_max) {
  double best = std::numeric_limits<double>::infinity();
  const double rx = o.x - p.center.x, ry = o.y - p.center.y;
  const double r2 = p.footprint_radius * p.footprint_radius;

  const double a = d.x * d.x + d.y * d.y;
  if (a > 1e-30) {
    const double b = 2.0 * (rx * d.x + ry * d.y);
    const double c = rx * rx + ry * ry - r2;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t < t_min || t > t_max) continue;
        const double z = o.z + t * d.z - ground_z;
        if (z >= 0.0 && z <= p.height && t < best) best = t;
      }
    }
  }
  if (std::abs(d.z) > 1e-30) {
    for (const double zc : {ground_z + p.height, ground_z}) {
      const double t = (zc - o.z) / d.z;
      if (t < t_min || t > t_max || t >= best) continue;
      const double px = rx + t * d.x, py = ry + t * d.y;
      if (px * px + py * py <= r2) best = t;
    }
  }
  return best;
}

}  // namespace detail

/// Nearest of plant-cylinder, ground-plane, or sky along a ray. Exact
/// closed-form intersections; plant search walks the bucket index.
inline RayHit cast_ray(const FarmWorld& w, const Vec3& origin, const Vec3& dir,
                       double max_range) {
  if (max_range <= 0.0) throw std::invalid_argument("max_range must be > 0");

  double t_ground = std::numeric_limits<double>::infinity();
  if (dir.z < 0.0 && origin.z > w.ground_z)
    t_ground = (w.ground_z - origin.z) / dir.z;
  else if (dir.z > 0.0 && origin.z < w.ground_z)
    t_ground = (w.ground_z - origin.z) / dir.z;

  double t_limit = std::min(max_range, t_ground);
  double best_t = std::numeric_limits<double>::infinity();

  const double eps = 1e-12;
  const Vec2 o2{origin.x, origin.y};
  const Vec2 d2{dir.x, dir.y};
  const double planar = d2.norm();
  if (planar > 1e-15) {
    // Clip the planar ray against the bucket grid extent.
    const auto& g = w.bucket_geom;
    const Vec2 blo = g.origin;
    const Vec2 bhi{g.origin.x + g.width * g.resolution,
                   g.origin.y + g.height * g.resolution};
    double t0 = 0.0, t1 = t_limit;
    for (int axis = 0; axis < 2; ++axis) {
      const double o = axis ? o2.y : o2.x;
      const double d = axis ? d2.y : d2.x;
      const double lo = axis ? blo.y : blo.x;
      const double hi = axis ? bhi.y : bhi.x;
      if (std::abs(d) < 1e-15) {
        if (o < lo || o > hi) t0 = t1 + 1.0;
      } else {
        double ta = (lo - o) / d, tb = (hi - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
    }
    if (t0 <= t1) {
      const Vec2 start = o2 + d2 * t0;
      const Vec2 end = o2 + d2 * t1;
      for (const CellIndex& cell : traverse_cells(g, start, end)) {
        double cell_exit = t1;
        {
          // Conservative exit distance: far corner of this bucket.
          const Vec2 c = g.cell_center(cell);
          const double half = g.resolution * 0.5;
          const double fx = c.x + (d2.x >= 0 ? half : -half);
          const double fy = c.y + (d2.y >= 0 ? half : -half);
          double te = t1;
          if (std::abs(d2.x) > 1e-15) te = std::min(te, (fx - o2.x) / d2.x);
          if (std::abs(d2.y) > 1e-15) te = std::min(te, (fy - o2.y) / d2.y);
          cell_exit = te;
        }
        for (const int pi : w.buckets[g.index(cell)]) {
          const double t = detail::cylinder_entry_t(w.plants[pi], origin, dir,
                                                    w.ground_z, eps, t_limit);
          if (t < best_t) best_t = t;
        }
        if (best_t <= cell_exit + 1e-9) break;  // nearest hit confirmed
      }
    }
  } else {
    // Vertical ray: lateral surface cannot be crossed.
  }

  RayHit hit;
  if (best_t <= t_limit) {
    hit.surface = SurfaceClass::cotton;
    hit.range = best_t;
    hit.point = origin + dir * best_t;
  } else if (t_ground <= max_range) {
    hit.surface = SurfaceClass::ground;
    hit.range = t_ground;
    hit.point = origin + dir * t_ground;
  } else {
    hit.surface = SurfaceClass::sky;
    hit.range = std::numeric_limits<double>::infinity();
    hit.point = origin + dir * max_range;
  }
  return hit;
}

/// Ground-truth occupancy: cell occupied iff its center lies inside some
/// plant footprint disk.
inline OccupancyGrid rasterize_footprints(const FarmWorld& w, double resolution,
                                          double margin = 0.0) {
  if (resolution <= 0.0) throw std::invalid_argument("resolution must be > 0");
  OccupancyGrid grid(grid_covering(w.bounds.lo, w.bounds.hi, resolution, margin));
  for (auto& v : grid.log_odds) v = -5.0;
  for (const auto& p : w.plants) {
    const CellIndex c0 = grid.geom.world_to_cell(
        {p.center.x - p.footprint_radius, p.center.y - p.footprint_radius});
    const CellIndex c1 = grid.geom.world_to_cell(
        {p.center.x + p.footprint_radius, p.center.y + p.footprint_radius});
    const double r2 = p.footprint_radius * p.footprint_radius;
    for (int iy = c0.y; iy <= c1.y; ++iy) {
      for (int ix = c0.x; ix <= c1.x; ++ix) {
        if (!grid.geom.in_bounds(ix, iy)) continue;
        const Vec2 c = grid.geom.cell_center(ix, iy);
        if ((c - p.center).norm_sq() <= r2) grid.at(ix, iy) = 5.0;
      }
    }
  }
  return grid;
}

/// Plant-center CSV: header `row,index,x,y`, 6-decimal fixed point.
inline void export_plants_csv(const FarmWorld& w, std::ostream& os) {
  os << "row,index,x,y\n";
  char buf[96];
  for (int r = 0; r < w.config.n_rows; ++r) {
    for (int i = 0; i < w.config.plants_per_row; ++i) {
      const auto& p = w.plant(r, i);
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f\n", r, i, p.center.x, p.center.y);
      os << buf;
    }
  }
}

}  // namespace rowsim
