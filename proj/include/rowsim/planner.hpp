#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "rowsim/grid.hpp"
#include "rowsim/localization.hpp"
#include "rowsim/math.hpp"
#include "rowsim/robot.hpp"

namespace rowsim {

inline constexpr std::uint8_t kCostLethal = 254;
inline constexpr std::uint8_t kCostInscribed = 253;
inline constexpr std::uint8_t kCostMaxNonLethal = 252;

struct InflationParams {
  double inscribed_radius = 0.335;  // robot width / 2
  double inflation_radius = 0.9;
  double cost_decay = 5.0;  // 1/m
  bool unknown_is_lethal = true;
};

struct Costmap {
  GridGeom geom;
  std::vector<std::uint8_t> cost;
  InflationParams params;

  std::uint8_t at(int ix, int iy) const { return cost[geom.index(ix, iy)]; }
  std::uint8_t at_world(const Vec2& p) const {
    const CellIndex c = geom.world_to_cell(p);
    if (!geom.in_bounds(c)) return kCostLethal;  // off-map treated as untraversable
    return cost[geom.index(c)];
  }
};

/// Exponentially decaying obstacle inflation over a thresholded map. Only
/// thresholded maps are accepted (the input kind is enforced by type).
inline Costmap inflate(const TernaryMap& map, const InflationParams& params = {}) {
  Costmap cm;
  cm.geom = map.geom;
  cm.params = params;
  cm.cost.assign(map.geom.size(), 0);

  TernaryMap obstacle_view = map;
  if (params.unknown_is_lethal) {
    for (auto& c : obstacle_view.cells)
      if (c == CellState::unknown) c = CellState::occupied;
  }
  const std::vector<double> d2 = detail::squared_edt(obstacle_view);
  const double res = map.geom.resolution;
  for (std::size_t i = 0; i < cm.cost.size(); ++i) {
    const double d = std::sqrt(d2[i]) * res;
    if (obstacle_view.cells[i] == CellState::occupied)
      cm.cost[i] = kCostLethal;
    else if (d <= params.inscribed_radius)
      cm.cost[i] = kCostInscribed;
    else if (d <= params.inflation_radius)
      cm.cost[i] = static_cast<std::uint8_t>(std::lround(
          kCostMaxNonLethal * std::exp(-params.cost_decay * (d - params.inscribed_radius))));
    else
      cm.cost[i] = 0;
  }
  return cm;
}

struct PathPlan {
  std::vector<Vec2> points;
  double total_cost = 0.0;
};

struct NoPathError : std::runtime_error {
  NoPathError() : std::runtime_error("global planner: goal unreachable") {}
};
struct InvalidEndpointError : std::runtime_error {
  InvalidEndpointError() : std::runtime_error("global planner: start or goal on lethal cell") {}
};

/// A* over 8-connected cells. Edge weight = Euclidean step * (1 + cost/128);
/// Euclidean heuristic (scaled strictly admissible); deterministic tie-break
/// by (f, h, cell index).
inline PathPlan plan_global(const Costmap& cm, const Vec2& start, const Vec2& goal) {
  const GridGeom& g = cm.geom;
  const CellIndex sc = g.world_to_cell(start);
  const CellIndex gc = g.world_to_cell(goal);
  if (!g.in_bounds(sc) || !g.in_bounds(gc)) throw InvalidEndpointError();
  if (cm.at(sc.x, sc.y) >= kCostInscribed || cm.at(gc.x, gc.y) >= kCostInscribed)
    throw InvalidEndpointError();

  const std::size_t n = g.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<std::int32_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  struct Node {
    double f, h;
    std::size_t idx;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return idx > o.idx;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;

  const double res = g.resolution;
  auto heuristic = [&](std::size_t idx) {
    const int ix = static_cast<int>(idx % g.width), iy = static_cast<int>(idx / g.width);
    const double dx = (ix - gc.x) * res, dy = (iy - gc.y) * res;
    return std::sqrt(dx * dx + dy * dy) * (1.0 - 1e-12);
  };

  const std::size_t start_idx = g.index(sc), goal_idx = g.index(gc);
  dist[start_idx] = 0.0;
  open.push({heuristic(start_idx), heuristic(start_idx), start_idx});

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double diag = res * std::sqrt(2.0);

  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (closed[cur.idx]) continue;
    closed[cur.idx] = 1;
    if (cur.idx == goal_idx) break;
    const int cx = static_cast<int>(cur.idx % g.width);
    const int cy = static_cast<int>(cur.idx / g.width);
    for (int k = 0; k < 8; ++k) {
      const int nx = cx + kDx[k], ny = cy + kDy[k];
      if (!g.in_bounds(nx, ny)) continue;
      const std::size_t ni = g.index(nx, ny);
      if (closed[ni]) continue;
      const std::uint8_t c = cm.cost[ni];
      if (c >= kCostInscribed) continue;
      const double step = (k < 4 ? res : diag) * (1.0 + c / 128.0);
      const double nd = dist[cur.idx] + step;
      if (nd < dist[ni]) {
        dist[ni] = nd;
        parent[ni] = static_cast<std::int32_t>(cur.idx);
        const double h = heuristic(ni);
        open.push({nd + h, h, ni});
      }
    }
  }
  if (!closed[goal_idx]) throw NoPathError();

  PathPlan plan;
  plan.total_cost = dist[goal_idx];
  std::vector<std::size_t> chain;
  for (std::int64_t i = static_cast<std::int64_t>(goal_idx); i >= 0;
       i = parent[static_cast<std::size_t>(i)])
    chain.push_back(static_cast<std::size_t>(i));
  std::reverse(chain.begin(), chain.end());
  plan.points.reserve(chain.size());
  for (const std::size_t idx : chain)
    plan.points.push_back(g.cell_center(static_cast<int>(idx % g.width),
                                        static_cast<int>(idx / g.width)));
  return plan;
}

struct DwaConfig {
  double sim_horizon = 2.0;  // s
  double dt = 0.1;           // s, also the window accel period
  int v_samples = 11;
  int w_samples = 21;
  double weight_heading = 0.6;
  double weight_clearance = 0.2;
  double weight_velocity = 0.2;
  double lookahead = 1.0;  // m along the reference path

  void validate() const {
    if (v_samples < 2 || w_samples < 2) throw std::invalid_argument("dwa: samples >= 2");
    if (!(sim_horizon > dt && dt > 0)) throw std::invalid_argument("dwa: horizon > dt > 0");
  }
};

struct DwaResult {
  double v = 0.0;
  double omega = 0.0;
  bool recovery = false;
};

namespace detail {

inline Vec2 path_lookahead(const std::vector<Vec2>& path, const Vec2& pos,
                           double lookahead) {
  // projection of pos onto the polyline, then walk ahead
  std::size_t best_seg = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  if (path.size() == 1) return path[0];
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2 a = path[i], b = path[i + 1];
    const Vec2 ab = b - a;
    const double len2 = ab.norm_sq();
    double t = len2 > 0 ? clamp((pos - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 proj = a + ab * t;
    const double d2 = (pos - proj).norm_sq();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_seg = i;
      best_t = t;
    }
  }
  Vec2 cur = path[best_seg] + (path[best_seg + 1] - path[best_seg]) * best_t;
  double remaining = lookahead;
  std::size_t i = best_seg;
  while (i + 1 < path.size()) {
    const double seg = (path[i + 1] - cur).norm();
    if (seg >= remaining && seg > 0) {
      return cur + (path[i + 1] - cur) * (remaining / seg);
    }
    remaining -= seg;
    cur = path[i + 1];
    ++i;
  }
  return path.back();
}

}  // namespace detail

/// Dynamic-window local planner: sample reachable (v, w), roll out the exact
/// arc model, discard colliding rollouts, score heading/clearance/velocity.
inline DwaResult plan_local_dwa(const RobotState& state, const std::vector<Vec2>& path,
                                const Costmap& cm, const DwaConfig& cfg,
                                const RobotSpec& spec) {
  cfg.validate();
  if (path.empty()) throw std::invalid_argument("dwa: reference path empty");

  const double v_lo = std::max(0.0, state.v - spec.max_accel * cfg.dt);
  const double v_hi = std::min(spec.max_speed, state.v + spec.max_accel * cfg.dt);
  const double w_lo = std::max(-spec.max_yaw_rate, state.omega - spec.max_yaw_accel * cfg.dt);
  const double w_hi = std::min(spec.max_yaw_rate, state.omega + spec.max_yaw_accel * cfg.dt);

  const int steps = static_cast<int>(std::ceil(cfg.sim_horizon / cfg.dt));
  double best_score = -std::numeric_limits<double>::infinity();
  double best_abs_w = std::numeric_limits<double>::infinity();
  DwaResult best{0.0, 0.0, true};

  for (int vi = 0; vi < cfg.v_samples; ++vi) {
    const double v = v_lo + (v_hi - v_lo) * vi / (cfg.v_samples - 1);
    for (int wi = 0; wi < cfg.w_samples; ++wi) {
      const double w = w_lo + (w_hi - w_lo) * wi / (cfg.w_samples - 1);

      double px = state.x, py = state.y, pyaw = state.yaw;
      bool collides = cm.at_world({px, py}) >= kCostInscribed;
      double min_clearance = 1.0;
      for (int s = 0; s < steps && !collides; ++s) {
        if (std::abs(w) < 1e-9) {
          px += v * cfg.dt * std::cos(pyaw);
          py += v * cfg.dt * std::sin(pyaw);
        } else {
          const double r = v / w;
          const double yaw1 = pyaw + w * cfg.dt;
          px += r * (std::sin(yaw1) - std::sin(pyaw));
          py -= r * (std::cos(yaw1) - std::cos(pyaw));
          pyaw = yaw1;
        }
        const std::uint8_t c = cm.at_world({px, py});
        if (c >= kCostInscribed) {
          collides = true;
          break;
        }
        min_clearance = std::min(min_clearance, 1.0 - static_cast<double>(c) / kCostMaxNonLethal);
      }
      if (collides) continue;

      // carrot re-evaluated at the rollout endpoint so fast rollouts along the
      // path are not read as overshoot
      const Vec2 target = detail::path_lookahead(path, {px, py}, cfg.lookahead);
      double heading_err = 0.0;
      if ((target - Vec2{px, py}).norm() > 1e-9)
        heading_err =
            std::abs(normalize_angle(std::atan2(target.y - py, target.x - px) - pyaw));
      const double heading_score = 1.0 - heading_err / kPi;
      const double velocity_score = v / spec.max_speed;
      const double score = cfg.weight_heading * heading_score +
                           cfg.weight_clearance * min_clearance +
                           cfg.weight_velocity * velocity_score;
      if (score > best_score ||
          (score == best_score && std::abs(w) < best_abs_w)) {
        best_score = score;
        best_abs_w = std::abs(w);
        best = {v, w, false};
      }
    }
  }
  if (best.recovery) {
    best.v = 0.0;
    best.omega = 0.5;  // fixed rotate-in-place recovery
  }
  return best;
}

}  // namespace rowsim
