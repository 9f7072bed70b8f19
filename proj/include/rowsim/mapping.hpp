#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "rowsim/grid.hpp"
#include "rowsim/math.hpp"
#include "rowsim/sensors.hpp"

namespace rowsim {

struct LogOddsModel {
  double hit = 0.85;
  double miss = -0.4;
  double clamp = 5.0;
};

/// Additive evidence update at a known sensor pose: traversed cells get the
/// miss increment, the endpoint cell the hit increment (when the beam
/// returned), both clamped to +/- clamp.
inline void integrate_scan(OccupancyGrid& grid, const Pose2& sensor_pose,
                           const LidarScan& scan, const LogOddsModel& model = {}) {
  const Vec2 origin{sensor_pose.x, sensor_pose.y};
  if (!grid.geom.in_bounds(grid.geom.world_to_cell(origin)))
    throw std::out_of_range("sensor pose outside grid");
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double range = scan.ranges[i];
    const bool returned = range < scan.max_range;
    const double wa = sensor_pose.yaw + scan.angles[i];
    const Vec2 end = origin + Vec2{std::cos(wa), std::sin(wa)} * range;
    const auto cells = traverse_cells(grid.geom, origin, end);
    if (cells.empty()) continue;
    const std::size_t n = cells.size();
    for (std::size_t k = 0; k + 1 < n; ++k) {
      double& v = grid.log_odds[grid.geom.index(cells[k])];
      v = clamp(v + model.miss, -model.clamp, model.clamp);
    }
    double& last = grid.log_odds[grid.geom.index(cells[n - 1])];
    last = clamp(last + (returned ? model.hit : model.miss), -model.clamp, model.clamp);
  }
}

inline TernaryMap threshold_map(const OccupancyGrid& grid) {
  TernaryMap t(grid.geom);
  for (std::size_t i = 0; i < grid.log_odds.size(); ++i) {
    const double v = grid.log_odds[i];
    if (v >= grid.occupied_threshold)
      t.cells[i] = CellState::occupied;
    else if (v <= grid.free_threshold)
      t.cells[i] = CellState::free;
    else
      t.cells[i] = CellState::unknown;
  }
  return t;
}

/// Map file: `width height resolution origin_x origin_y` on line 1, then
/// row-major log-odds rows, 4-decimal fixed point. `#` lines are comments;
/// the saver records thresholds in one such comment.
inline void save_map(const OccupancyGrid& grid, std::ostream& os) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d %d %.6f %.6f %.6f\n", grid.geom.width,
                grid.geom.height, grid.geom.resolution, grid.geom.origin.x,
                grid.geom.origin.y);
  os << buf;
  std::snprintf(buf, sizeof(buf), "# thresholds %.6f %.6f\n", grid.occupied_threshold,
                grid.free_threshold);
  os << buf;
  std::string line;
  for (int iy = 0; iy < grid.geom.height; ++iy) {
    line.clear();
    for (int ix = 0; ix < grid.geom.width; ++ix) {
      std::snprintf(buf, sizeof(buf), "%.4f", grid.at(ix, iy));
      if (ix) line += ' ';
      line += buf;
    }
    line += '\n';
    os << line;
  }
}

inline void save_map(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open map file for writing: " + path);
  save_map(grid, f);
}

struct MapParseError : std::runtime_error {
  int line;
  MapParseError(int line_no, const std::string& what)
      : std::runtime_error("map parse error at line " + std::to_string(line_no) +
                           ": " + what),
        line(line_no) {}
};

inline OccupancyGrid load_map(std::istream& is) {
  std::string line;
  int line_no = 0;
  std::optional<std::pair<double, double>> thresholds;

  auto next_content_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      const std::size_t i = line.find_first_not_of(" \t\r");
      if (i == std::string::npos) continue;
      if (line[i] == '#') {
        std::istringstream cs(line.substr(i + 1));
        std::string word;
        double occ, fre;
        if (cs >> word >> occ >> fre && word == "thresholds")
          thresholds = {occ, fre};
        continue;
      }
      return true;
    }
    return false;
  };

  if (!next_content_line()) throw MapParseError(line_no, "missing header");
  GridGeom geom;
  {
    std::istringstream hs(line);
    if (!(hs >> geom.width >> geom.height >> geom.resolution >> geom.origin.x >>
          geom.origin.y))
      throw MapParseError(line_no, "bad header");
    if (geom.width <= 0 || geom.height <= 0 || geom.resolution <= 0)
      throw MapParseError(line_no, "non-positive dimensions");
  }
  OccupancyGrid grid(geom);

  for (int iy = 0; iy < geom.height; ++iy) {
    if (!next_content_line())
      throw MapParseError(line_no, "truncated grid: expected " +
                                       std::to_string(geom.height) + " rows");
    std::istringstream rs(line);
    for (int ix = 0; ix < geom.width; ++ix) {
      double v;
      if (!(rs >> v)) throw MapParseError(line_no, "short row");
      grid.at(ix, iy) = v;
    }
    double extra;
    if (rs >> extra) throw MapParseError(line_no, "trailing values in row");
  }
  if (thresholds) {
    grid.occupied_threshold = thresholds->first;
    grid.free_threshold = thresholds->second;
  }
  return grid;
}

inline OccupancyGrid load_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open map file: " + path);
  return load_map(f);
}

}  // namespace rowsim
