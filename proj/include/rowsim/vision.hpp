#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rowsim/math.hpp"
#include "rowsim/sensors.hpp"

namespace rowsim {

/// Per-class mask statistics. Row-center fields are the arithmetic means of
/// the mask x-indices on the extreme rows; integer sums are kept alongside so
/// downstream geometry can stay exact.
struct MaskStats {
  SurfaceClass cls = SurfaceClass::sky;
  int x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  double centroid_x = 0.0, centroid_y = 0.0;
  double center_x_at_y_min = 0.0, center_x_at_y_max = 0.0;
  std::int64_t pixel_count = 0;
  std::int64_t sum_x_at_y_min = 0, count_at_y_min = 0;
  std::int64_t sum_x_at_y_max = 0, count_at_y_max = 0;
};

/// Exact extrema / centroid over pixels of the class; empty mask -> nullopt.
inline std::optional<MaskStats> mask_stats(const SegMaskFrame& f, SurfaceClass cls) {
  MaskStats s;
  s.cls = cls;
  s.x_min = f.width;
  s.y_min = f.height;
  s.x_max = -1;
  s.y_max = -1;
  std::int64_t sx = 0, sy = 0;
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      if (f.at(u, v) != cls) continue;
      ++s.pixel_count;
      sx += u;
      sy += v;
      s.x_min = std::min(s.x_min, u);
      s.x_max = std::max(s.x_max, u);
      s.y_min = std::min(s.y_min, v);
      s.y_max = std::max(s.y_max, v);
    }
  }
  if (s.pixel_count == 0) return std::nullopt;
  s.centroid_x = static_cast<double>(sx) / s.pixel_count;
  s.centroid_y = static_cast<double>(sy) / s.pixel_count;
  for (int u = 0; u < f.width; ++u) {
    if (f.at(u, s.y_min) == cls) {
      s.sum_x_at_y_min += u;
      ++s.count_at_y_min;
    }
    if (f.at(u, s.y_max) == cls) {
      s.sum_x_at_y_max += u;
      ++s.count_at_y_max;
    }
  }
  s.center_x_at_y_min = static_cast<double>(s.sum_x_at_y_min) / s.count_at_y_min;
  s.center_x_at_y_max = static_cast<double>(s.sum_x_at_y_max) / s.count_at_y_max;
  return s;
}

/// Line through the row-centers at the extreme mask rows.
struct GuidanceLine {
  double x0 = 0, y0 = 0;  // lower-center (y_min row)
  double x1 = 0, y1 = 0;  // upper-center (y_max row)
  SurfaceClass source = SurfaceClass::sky;
};

/// Degenerate (single-row) masks yield nullopt.
inline std::optional<GuidanceLine> fit_guidance_line(const MaskStats& s) {
  if (s.y_min == s.y_max) return std::nullopt;
  return GuidanceLine{s.center_x_at_y_min, static_cast<double>(s.y_min),
                      s.center_x_at_y_max, static_cast<double>(s.y_max), s.cls};
}

struct IntersectionPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Homogeneous two-line intersection; near-parallel directions (normalized
/// cross below 1e-9) signal nullopt.
inline std::optional<IntersectionPoint> intersect_lines(const GuidanceLine& a,
                                                        const GuidanceLine& b) {
  const Vec2 da{a.x1 - a.x0, a.y1 - a.y0};
  const Vec2 db{b.x1 - b.x0, b.y1 - b.y0};
  const double na = da.norm(), nb = db.norm();
  if (na <= 0 || nb <= 0) throw std::invalid_argument("degenerate guidance line");
  const double cross = (da.x * db.y - da.y * db.x) / (na * nb);
  if (std::abs(cross) < 1e-9) return std::nullopt;
  // L = P0 x P1 in homogeneous coordinates, X = La x Lb
  const double la0 = a.y0 - a.y1, la1 = a.x1 - a.x0, la2 = a.x0 * a.y1 - a.x1 * a.y0;
  const double lb0 = b.y0 - b.y1, lb1 = b.x1 - b.x0, lb2 = b.x0 * b.y1 - b.x1 * b.y0;
  const double xw = la1 * lb2 - la2 * lb1;
  const double yw = la2 * lb0 - la0 * lb2;
  const double w = la0 * lb1 - la1 * lb0;
  if (std::abs(w) < 1e-300) return std::nullopt;
  return IntersectionPoint{xw / w, yw / w};
}

enum class GuidanceConfidence { full, degraded, none };

struct SteeringCorrection {
  double angle_deg = 0.0;  // positive turns left (toward +yaw)
  GuidanceConfidence confidence = GuidanceConfidence::none;
};

struct GuidanceParams {
  double gain = 1.0;
  double deadband = 0.02;      // on the normalized offset e
  double min_row_frac = 0.05;  // fraction of width a row must hold to qualify
  int anchor_rows = 3;         // qualified rows pooled into each line anchor
  double max_angle_deg = 5.0;
};

/// Bounded proportional steering from the intersection's horizontal offset.
/// e is normalized by the pixel-center half-width so the law is exactly
/// antisymmetric under horizontal mirroring.
inline SteeringCorrection steering_correction(double x_int, int frame_width,
                                              const GuidanceParams& p = {}) {
  const double c = (frame_width - 1) / 2.0;
  const double e = (c - x_int) / c;
  SteeringCorrection out;
  out.confidence = GuidanceConfidence::full;
  if (std::abs(e) < p.deadband) {
    out.angle_deg = 0.0;
    return out;
  }
  out.angle_deg = clamp(p.gain * e * p.max_angle_deg, -p.max_angle_deg, p.max_angle_deg);
  return out;
}

struct GuidanceResult {
  SteeringCorrection steer;
  std::optional<IntersectionPoint> sky_ground;
  // computed and logged, unused by control
  std::optional<IntersectionPoint> cotton_ground;
  std::optional<IntersectionPoint> cotton_sky;
};

namespace detail {

struct RowBand {
  // pooled anchor rows at the qualified extremes, exact integer sums:
  // lo anchor = (sum of x, sum of n*y, sum of n) over the pooled rows
  bool ok = false;
  std::int64_t lo_x = 0, lo_y = 0, lo_w = 0;
  std::int64_t hi_x = 0, hi_y = 0, hi_w = 0;
};

struct HLine {
  // integer homogeneous line coefficients (fit int64 for frames to ~2k px)
  std::int64_t a = 0, b = 0, c = 0;
  bool ok = false;
};

struct HPoint {
  __int128 x = 0, y = 0, w = 0;
  bool ok = false;
};

inline HLine band_line(const RowBand& band) {
  HLine l;
  if (!band.ok) return l;
  // anchors are homogeneous points (sum_x, sum_n_y, sum_n); L = P0 x P1
  l.a = band.lo_y * band.hi_w - band.lo_w * band.hi_y;
  l.b = band.lo_w * band.hi_x - band.lo_x * band.hi_w;
  l.c = band.lo_x * band.hi_y - band.lo_y * band.hi_x;
  l.ok = l.a != 0 || l.b != 0 || l.c != 0;
  return l;
}

inline HPoint line_cross(const HLine& la, const HLine& lb) {
  HPoint p;
  if (!la.ok || !lb.ok) return p;
  p.x = static_cast<__int128>(la.b) * lb.c - static_cast<__int128>(la.c) * lb.b;
  p.y = static_cast<__int128>(la.c) * lb.a - static_cast<__int128>(la.a) * lb.c;
  p.w = static_cast<__int128>(la.a) * lb.b - static_cast<__int128>(la.b) * lb.a;
  p.ok = p.w != 0;
  return p;
}

inline std::optional<IntersectionPoint> to_point(const HPoint& p) {
  if (!p.ok) return std::nullopt;
  return IntersectionPoint{static_cast<double>(p.x) / static_cast<double>(p.w),
                           static_cast<double>(p.y) / static_cast<double>(p.w)};
}

}  // namespace detail

/// Sky/ground line construction and steering in one pass. Rows must hold at
/// least min_row_frac * width pixels of a class to anchor its line, which
/// keeps isolated label flips from hijacking the extreme rows. Intersection
/// and offset are evaluated in exact integer arithmetic.
inline GuidanceResult guidance_from_frame(const SegMaskFrame& f,
                                          const GuidanceParams& params = {}) {
  GuidanceResult out;
  out.steer.confidence = GuidanceConfidence::none;
  out.steer.angle_deg = 0.0;
  if (f.width <= 1 || f.height == 0) return out;

  const std::int64_t min_count = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(params.min_row_frac * f.width)));

  // per-row (count, sum_x) per class, one pass
  std::vector<std::int64_t> cnt(3 * f.height, 0), sum(3 * f.height, 0);
  for (int v = 0; v < f.height; ++v) {
    for (int u = 0; u < f.width; ++u) {
      const int k = static_cast<int>(f.at(u, v));
      cnt[3 * v + k] += 1;
      sum[3 * v + k] += u;
    }
  }
  const int pool = std::max(1, params.anchor_rows);
  auto band_for = [&](SurfaceClass cls) {
    detail::RowBand b;
    const int k = static_cast<int>(cls);
    std::vector<int> rows;
    for (int v = 0; v < f.height; ++v)
      if (cnt[3 * v + k] >= min_count) rows.push_back(v);
    if (rows.size() < 2) return b;  // absent or single-row band
    b.ok = true;
    for (int i = 0; i < pool && i < static_cast<int>(rows.size()); ++i) {
      const int v = rows[i];
      b.lo_x += sum[3 * v + k];
      b.lo_y += cnt[3 * v + k] * static_cast<std::int64_t>(v);
      b.lo_w += cnt[3 * v + k];
    }
    for (int i = 0; i < pool && i < static_cast<int>(rows.size()); ++i) {
      const int v = rows[rows.size() - 1 - i];
      b.hi_x += sum[3 * v + k];
      b.hi_y += cnt[3 * v + k] * static_cast<std::int64_t>(v);
      b.hi_w += cnt[3 * v + k];
    }
    return b;
  };

  auto has_rows = [&](SurfaceClass cls) {
    const int k = static_cast<int>(cls);
    for (int v = 0; v < f.height; ++v)
      if (cnt[3 * v + k] >= min_count) return true;
    return false;
  };

  const detail::RowBand sky = band_for(SurfaceClass::sky);
  const detail::RowBand ground = band_for(SurfaceClass::ground);
  const detail::RowBand cotton = band_for(SurfaceClass::cotton);

  const detail::HLine sky_line = detail::band_line(sky);
  const detail::HLine ground_line = detail::band_line(ground);
  const detail::HLine cotton_line = detail::band_line(cotton);

  out.cotton_ground = detail::to_point(detail::line_cross(cotton_line, ground_line));
  out.cotton_sky = detail::to_point(detail::line_cross(cotton_line, sky_line));

  if (!has_rows(SurfaceClass::sky) || !has_rows(SurfaceClass::ground)) {
    out.steer.confidence = GuidanceConfidence::none;  // a mask is absent
    return out;
  }
  if (!sky_line.ok || !ground_line.ok) {
    out.steer.confidence = GuidanceConfidence::degraded;  // single-row mask
    return out;
  }
  const detail::HPoint x = detail::line_cross(sky_line, ground_line);
  if (!x.ok) {
    out.steer.confidence = GuidanceConfidence::degraded;  // parallel lines
    return out;
  }
  out.sky_ground = detail::to_point(x);

  // e = ((W-1) * w - 2 * x) / ((W-1) * w), exact integers; mirroring the frame
  // negates the numerator and preserves the denominator up to sign.
  const __int128 num =
      static_cast<__int128>(f.width - 1) * x.w - static_cast<__int128>(2) * x.x;
  const __int128 den = static_cast<__int128>(f.width - 1) * x.w;
  if (den == 0) {
    out.steer.confidence = GuidanceConfidence::degraded;
    return out;
  }
  const double e = static_cast<double>(num) / static_cast<double>(den);
  out.steer.confidence = GuidanceConfidence::full;
  if (std::abs(e) < params.deadband) {
    out.steer.angle_deg = 0.0;
  } else {
    out.steer.angle_deg =
        clamp(params.gain * e * params.max_angle_deg, -params.max_angle_deg,
              params.max_angle_deg);
  }
  return out;
}

/// Horizontal mirror used by the antisymmetry property tests.
inline SegMaskFrame mirror_frame(const SegMaskFrame& f) {
  SegMaskFrame m = f;
  for (int v = 0; v < f.height; ++v)
    for (int u = 0; u < f.width; ++u) m.at(u, v) = f.at(f.width - 1 - u, v);
  return m;
}

}  // namespace rowsim
