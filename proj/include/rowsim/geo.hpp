#pragma once

#include <cmath>
#include <stdexcept>

#include "rowsim/math.hpp"

namespace rowsim::geo {

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

enum class Hemisphere { north, south };

struct UtmCoord {
  double easting = 0.0;   // meters
  double northing = 0.0;  // meters
  int zone = 0;           // 1..60
  Hemisphere hemisphere = Hemisphere::north;
};

// WGS-84
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kUtmScale = 0.9996;
inline constexpr double kFalseEasting = 500000.0;
inline constexpr double kFalseNorthingSouth = 10000000.0;

namespace detail {

inline constexpr double kE2 = kFlattening * (2.0 - kFlattening);
inline const double kE = std::sqrt(kE2);
inline constexpr double kN = kFlattening / (2.0 - kFlattening);  // third flattening

// Krueger series coefficients, order n^6 (rectifying <-> conformal latitude).
struct Series {
  double alpha[6];
  double beta[6];
  double a_rect;  // rectifying radius A
};

inline const Series& series() {
  static const Series s = [] {
    const double n = kN, n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n,
                 n6 = n5 * n;
    Series out{};
    out.alpha[0] = n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 -
                   127 * n5 / 288 + 7891 * n6 / 37800;
    out.alpha[1] = 13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 -
                   1983433 * n6 / 1935360;
    out.alpha[2] = 61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 +
                   167603 * n6 / 181440;
    out.alpha[3] = 49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600;
    out.alpha[4] = 34729 * n5 / 80640 - 3418889 * n6 / 1995840;
    out.alpha[5] = 212378941 * n6 / 319334400;
    out.beta[0] = n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 +
                  96199 * n6 / 604800;
    out.beta[1] = n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 -
                  1118711 * n6 / 3870720;
    out.beta[2] = 17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720;
    out.beta[3] = 4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600;
    out.beta[4] = 4583 * n5 / 161280 - 108847 * n6 / 3991680;
    out.beta[5] = 20648693 * n6 / 638668800;
    out.a_rect = kSemiMajorAxis / (1 + n) * (1 + n2 / 4 + n4 / 64 + n6 / 256);
    return out;
  }();
  return s;
}

}  // namespace detail

inline int utm_zone_for(double lon) {
  int zone = static_cast<int>(std::floor((lon + 180.0) / 6.0)) + 1;
  if (zone < 1) zone = 1;
  if (zone > 60) zone = 60;
  return zone;
}

inline double central_meridian(int zone) { return -183.0 + 6.0 * zone; }

/// WGS-84 geodetic to UTM (transverse Mercator, Krueger series order 6).
inline UtmCoord gps_to_utm(const GeoPoint& p) {
  if (!(p.lat >= -84.0 && p.lat <= 84.0))
    throw std::domain_error("latitude outside UTM validity (|lat| <= 84)");
  if (!(p.lon > -180.0 && p.lon <= 180.0))
    throw std::domain_error("longitude out of range");
  const auto& s = detail::series();
  const int zone = utm_zone_for(p.lon);
  const double lam = deg2rad(p.lon - central_meridian(zone));
  const double phi = deg2rad(p.lat);

  const double sphi = std::sin(phi);
  const double t = std::sinh(std::atanh(sphi) - detail::kE * std::atanh(detail::kE * sphi));
  const double xi_p = std::atan2(t, std::cos(lam));
  const double eta_p = std::asinh(std::sin(lam) / std::hypot(t, std::cos(lam)));

  double xi = xi_p, eta = eta_p;
  for (int j = 1; j <= 6; ++j) {
    xi += s.alpha[j - 1] * std::sin(2 * j * xi_p) * std::cosh(2 * j * eta_p);
    eta += s.alpha[j - 1] * std::cos(2 * j * xi_p) * std::sinh(2 * j * eta_p);
  }

  UtmCoord u;
  u.zone = zone;
  u.hemisphere = p.lat < 0.0 ? Hemisphere::south : Hemisphere::north;
  u.easting = kFalseEasting + kUtmScale * s.a_rect * eta;
  u.northing = kUtmScale * s.a_rect * xi;
  if (u.hemisphere == Hemisphere::south) u.northing += kFalseNorthingSouth;
  return u;
}

/// Inverse UTM. Conformal-to-geodetic latitude inverted by Newton on tau.
inline GeoPoint utm_to_gps(const UtmCoord& u) {
  if (u.zone < 1 || u.zone > 60) throw std::domain_error("bad UTM zone");
  if (!(u.easting > 160000.0 && u.easting < 840000.0))
    throw std::domain_error("easting outside usable zone width");
  const auto& s = detail::series();
  const double northing =
      u.hemisphere == Hemisphere::south ? u.northing - kFalseNorthingSouth : u.northing;
  const double xi = northing / (kUtmScale * s.a_rect);
  const double eta = (u.easting - kFalseEasting) / (kUtmScale * s.a_rect);

  double xi_p = xi, eta_p = eta;
  for (int j = 1; j <= 6; ++j) {
    xi_p -= s.beta[j - 1] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    eta_p -= s.beta[j - 1] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }

  const double tau_p = std::sin(xi_p) /
                       std::sqrt(std::sinh(eta_p) * std::sinh(eta_p) +
                                 std::cos(xi_p) * std::cos(xi_p));
  double tau = tau_p;
  for (int it = 0; it < 30; ++it) {
    const double sig =
        std::sinh(detail::kE * std::atanh(detail::kE * tau / std::sqrt(1 + tau * tau)));
    const double f = tau * std::sqrt(1 + sig * sig) - sig * std::sqrt(1 + tau * tau) - tau_p;
    const double df = (std::sqrt((1 + sig * sig) * (1 + tau * tau)) - sig * tau) *
                      (1 - detail::kE2) * std::sqrt(1 + tau * tau) /
                      (1 + (1 - detail::kE2) * tau * tau);
    const double step = f / df;
    tau -= step;
    if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(tau))) break;
  }

  GeoPoint p;
  p.lat = rad2deg(std::atan(tau));
  p.lon = central_meridian(u.zone) +
          rad2deg(std::atan2(std::sinh(eta_p), std::cos(xi_p)));
  return p;
}

/// Anchor tying the planar map frame to the globe. map_heading is the rotation
/// from UTM east to the map +x axis.
struct GeoAnchor {
  GeoPoint anchor_geo;
  UtmCoord anchor_utm;
  double map_heading = 0.0;  // radians

  static GeoAnchor from_geo(const GeoPoint& g, double map_heading) {
    return {g, gps_to_utm(g), map_heading};
  }
};

inline Vec2 utm_to_map(const UtmCoord& u, const GeoAnchor& a) {
  if (u.zone != a.anchor_utm.zone || u.hemisphere != a.anchor_utm.hemisphere)
    throw std::domain_error("UTM zone mismatch with anchor (no cross-zone stitching)");
  const Vec2 d{u.easting - a.anchor_utm.easting, u.northing - a.anchor_utm.northing};
  return rotate(d, -a.map_heading);
}

inline GeoPoint map_to_gps(double x, double y, const GeoAnchor& a) {
  const Vec2 d = rotate({x, y}, a.map_heading);
  UtmCoord u = a.anchor_utm;
  u.easting += d.x;
  u.northing += d.y;
  return utm_to_gps(u);
}

inline Vec2 gps_to_map(const GeoPoint& p, const GeoAnchor& a) {
  return utm_to_map(gps_to_utm(p), a);
}

}  // namespace rowsim::geo
