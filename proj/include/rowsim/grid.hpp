#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rowsim/math.hpp"

namespace rowsim {

struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

struct GridGeom {
  int width = 0;
  int height = 0;
  double resolution = 0.05;  // meters per cell
  Vec2 origin;               // world position of the (0,0) cell corner

  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * width + ix;
  }
  std::size_t index(const CellIndex& c) const { return index(c.x, c.y); }
  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width && iy < height;
  }
  bool in_bounds(const CellIndex& c) const { return in_bounds(c.x, c.y); }
  CellIndex world_to_cell(const Vec2& p) const {
    return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
            static_cast<int>(std::floor((p.y - origin.y) / resolution))};
  }
  Vec2 cell_center(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * resolution, origin.y + (iy + 0.5) * resolution};
  }
  Vec2 cell_center(const CellIndex& c) const { return cell_center(c.x, c.y); }
  bool operator==(const GridGeom& o) const {
    return width == o.width && height == o.height && resolution == o.resolution &&
           origin.x == o.origin.x && origin.y == o.origin.y;
  }
};

/// Build a geometry covering [lo, hi] with the given margin.
inline GridGeom grid_covering(const Vec2& lo, const Vec2& hi, double resolution,
                              double margin = 0.0) {
  if (resolution <= 0.0) throw std::invalid_argument("resolution must be > 0");
  GridGeom g;
  g.resolution = resolution;
  g.origin = {lo.x - margin, lo.y - margin};
  g.width = static_cast<int>(std::ceil((hi.x + margin - g.origin.x) / resolution)) + 1;
  g.height = static_cast<int>(std::ceil((hi.y + margin - g.origin.y) / resolution)) + 1;
  return g;
}

/// Log-odds occupancy grid shared by mapping, localization and planning.
struct OccupancyGrid {
  GridGeom geom;
  std::vector<double> log_odds;
  double occupied_threshold = 0.7;
  double free_threshold = -0.5;

  explicit OccupancyGrid(const GridGeom& g = {}) : geom(g), log_odds(g.size(), 0.0) {}

  double& at(int ix, int iy) { return log_odds[geom.index(ix, iy)]; }
  double at(int ix, int iy) const { return log_odds[geom.index(ix, iy)]; }
};

enum class CellState : std::uint8_t { free = 0, unknown = 1, occupied = 2 };

struct TernaryMap {
  GridGeom geom;
  std::vector<CellState> cells;

  explicit TernaryMap(const GridGeom& g = {})
      : geom(g), cells(g.size(), CellState::unknown) {}

  CellState& at(int ix, int iy) { return cells[geom.index(ix, iy)]; }
  CellState at(int ix, int iy) const { return cells[geom.index(ix, iy)]; }
};

/// All cells crossed by segment [a, b], in traversal order. Exact incremental
/// line walk; ties on exact corner crossings advance the axis that yields the
/// lower linear cell index first.
inline std::vector<CellIndex> traverse_cells(const GridGeom& g, const Vec2& a,
                                             const Vec2& b) {
  std::vector<CellIndex> out;
  CellIndex cur = g.world_to_cell(a);
  const CellIndex last = g.world_to_cell(b);
  if (g.in_bounds(cur)) out.push_back(cur);

  const double dx = b.x - a.x, dy = b.y - a.y;
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  if (step_x == 0 && step_y == 0) return out;

  // Parametric distance to the next vertical / horizontal cell boundary.
  auto boundary_t = [&](double start, double delta, double org, double res,
                        int cell, int step) {
    if (step == 0) return std::numeric_limits<double>::infinity();
    const double edge = org + (cell + (step > 0 ? 1 : 0)) * res;
    return (edge - start) / delta;
  };
  double t_max_x = boundary_t(a.x, dx, g.origin.x, g.resolution, cur.x, step_x);
  double t_max_y = boundary_t(a.y, dy, g.origin.y, g.resolution, cur.y, step_y);
  const double t_dx = step_x ? g.resolution / std::abs(dx)
                             : std::numeric_limits<double>::infinity();
  const double t_dy = step_y ? g.resolution / std::abs(dy)
                             : std::numeric_limits<double>::infinity();

  int guard = 4 * (g.width + g.height) + 8;
  while (guard-- > 0) {
    bool advance_x;
    if (t_max_x < t_max_y) {
      advance_x = true;
    } else if (t_max_y < t_max_x) {
      advance_x = false;
    } else {
      // Exact corner: pick the axis producing the lower linear index.
      const std::size_t ix = g.index(cur.x + step_x, cur.y);
      const std::size_t iy = g.index(cur.x, cur.y + step_y);
      advance_x = ix < iy;
    }
    if (advance_x) {
      if (t_max_x > 1.0) break;  // segment ends inside the current cell
      cur.x += step_x;
      t_max_x += t_dx;
    } else {
      if (t_max_y > 1.0) break;
      cur.y += step_y;
      t_max_y += t_dy;
    }
    if (g.in_bounds(cur)) out.push_back(cur);
    if (cur.x == last.x && cur.y == last.y) break;
  }
  return out;
}

}  // namespace rowsim
