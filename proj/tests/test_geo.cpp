#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rowsim/geo.hpp"
#include "rowsim/rng.hpp"

using namespace rowsim;
using namespace rowsim::geo;

TEST_CASE("central meridian maps to false easting") {
  const UtmCoord u = gps_to_utm({0.0, -87.0});
  CHECK(u.zone == 16);
  CHECK(u.hemisphere == Hemisphere::north);
  CHECK(u.easting == Catch::Approx(500000.0).margin(1e-6));
  CHECK(u.northing == Catch::Approx(0.0).margin(1e-6));

  const GeoPoint p = utm_to_gps({500000.0, 0.0, 16, Hemisphere::north});
  CHECK(p.lat == Catch::Approx(0.0).margin(1e-12));
  CHECK(p.lon == Catch::Approx(-87.0).margin(1e-12));
}

TEST_CASE("frozen reference conversions") {
  // reference values computed with an exact (elliptic-integral) transverse
  // Mercator evaluated in 50-digit arithmetic
  struct Ref {
    double lat, lon, easting, northing;
    int zone;
    Hemisphere hemi;
  };
  const Ref refs[] = {
      {33.4552, -88.7944, 333229.8999709, 3703192.253514, 16, Hemisphere::north},
      {40.5, -73.5, 627103.0873055, 4484335.401661, 18, Hemisphere::north},
      {-33.9, 18.4, 259583.2216604, 10000000.0 - 3754111.954559, 34, Hemisphere::south},
      {60.0, 5.0, 611544.0419768, 6653097.435295, 31, Hemisphere::north},
      {33.0, -84.2, 761607.011541, 3654770.105819, 16, Hemisphere::north},
      {34.1, -89.9, 232462.760939, 3777041.694282, 16, Hemisphere::north},
  };
  for (const Ref& r : refs) {
    const UtmCoord u = gps_to_utm({r.lat, r.lon});
    CHECK(u.zone == r.zone);
    CHECK(u.hemisphere == r.hemi);
    CHECK(u.easting == Catch::Approx(r.easting).margin(1e-4));
    CHECK(u.northing == Catch::Approx(r.northing).margin(1e-4));
  }
}

TEST_CASE("agreement with the independent Snyder-series oracle") {
  // 100 random points in the farm's zone agree within 0.01 m
  RngStream rng(42);
  for (int i = 0; i < 100; ++i) {
    const double lat = rng.uniform(30.0, 36.0);
    const double lon = rng.uniform(-89.9, -84.1);
    const UtmCoord u = gps_to_utm({lat, lon});
    REQUIRE(u.zone == 16);
    const auto s = oracles::snyder_forward(lat, lon, -87.0);
    REQUIRE(std::abs(u.easting - s.easting) < 0.01);
    REQUIRE(std::abs(u.northing - s.northing) < 0.01);

    const auto inv = oracles::snyder_inverse(u.easting, u.northing, -87.0);
    const GeoPoint p = utm_to_gps(u);
    REQUIRE(std::abs(p.lat - inv.lat_deg) < 1e-7);
    REQUIRE(std::abs(p.lon - inv.lon_deg) < 1e-7);
  }
}

TEST_CASE("round trips close to sub-millimeter") {
  RngStream rng(7);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint p{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    const UtmCoord u = gps_to_utm(p);
    const GeoPoint q = utm_to_gps(u);
    REQUIRE(std::abs(q.lat - p.lat) < 1e-9);
    REQUIRE(std::abs(q.lon - p.lon) < 1e-9);
  }
}

TEST_CASE("polar latitude and bad zones rejected") {
  CHECK_THROWS_AS(gps_to_utm({86.0, 10.0}), std::domain_error);
  CHECK_THROWS_AS(gps_to_utm({-86.0, 10.0}), std::domain_error);
  CHECK_THROWS_AS(utm_to_gps({100000.0, 0.0, 16, Hemisphere::north}), std::domain_error);
  CHECK_THROWS_AS(utm_to_gps({900000.0, 0.0, 16, Hemisphere::north}), std::domain_error);
}

TEST_CASE("utm_to_map frame conventions") {
  const GeoAnchor a = GeoAnchor::from_geo({33.4552, -88.7944}, 0.0);

  SECTION("anchor maps to the origin") {
    const Vec2 m = utm_to_map(a.anchor_utm, a);
    CHECK(m.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.y == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("heading 0: east is +x") {
    UtmCoord u = a.anchor_utm;
    u.easting += 10.0;
    const Vec2 m = utm_to_map(u, a);
    CHECK(m.x == Catch::Approx(10.0).margin(1e-9));
    CHECK(m.y == Catch::Approx(0.0).margin(1e-9));
  }
  SECTION("heading pi/2: east is -y") {
    const GeoAnchor r = GeoAnchor::from_geo({33.4552, -88.7944}, kPi / 2);
    UtmCoord u = r.anchor_utm;
    u.easting += 10.0;
    const Vec2 m = utm_to_map(u, r);
    CHECK(m.x == Catch::Approx(0.0).margin(1e-9));
    CHECK(m.y == Catch::Approx(-10.0).margin(1e-9));
  }
  SECTION("zone mismatch raises") {
    UtmCoord u = a.anchor_utm;
    u.zone = 17;
    CHECK_THROWS_AS(utm_to_map(u, a), std::domain_error);
  }
}

TEST_CASE("map_to_gps inverts the chain") {
  const GeoAnchor a = GeoAnchor::from_geo({33.4552, -88.7944}, kPi / 2);
  SECTION("map origin is the anchor") {
    const GeoPoint p = map_to_gps(0.0, 0.0, a);
    CHECK(p.lat == Catch::Approx(33.4552).margin(1e-12));
    CHECK(p.lon == Catch::Approx(-88.7944).margin(1e-12));
  }
  SECTION("round trip over random map points closes under 1 mm") {
    RngStream rng(3);
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-50, 50), y = rng.uniform(-50, 50);
      const GeoPoint p = map_to_gps(x, y, a);
      const Vec2 m = gps_to_map(p, a);
      REQUIRE(std::abs(m.x - x) < 1e-3);
      REQUIRE(std::abs(m.y - y) < 1e-3);
    }
  }
}

TEST_CASE("meridian offset matches a geodesic oracle at the central meridian") {
  // on the central meridian grid north equals true north, so a 100 m UTM
  // offset must match the meridian-arc geodesic within 1 cm
  const GeoAnchor a = GeoAnchor::from_geo({33.4552, -87.0}, 0.0);
  UtmCoord u = a.anchor_utm;
  u.northing += 100.0;
  const GeoPoint p = utm_to_gps(u);
  // meridian radius of curvature at the anchor latitude
  const double lat0 = deg2rad(33.4552);
  const double e2 = 0.0066943799901413165;
  const double m_radius =
      6378137.0 * (1 - e2) / std::pow(1 - e2 * std::sin(lat0) * std::sin(lat0), 1.5);
  // account for the UTM scale factor at the central meridian
  const double dlat_expected = rad2deg(100.0 / 0.9996 / m_radius);
  const double dlat_err_m = std::abs(p.lat - (33.4552 + dlat_expected)) * m_radius * kPi / 180.0;
  CHECK(dlat_err_m < 0.01);
  CHECK(std::abs(p.lon - (-87.0)) < 1e-9);
}

TEST_CASE("local metric fidelity near the anchor") {
  const GeoAnchor a = GeoAnchor::from_geo({33.4552, -88.7944}, kPi / 2);
  const GeoPoint p1 = map_to_gps(0.0, 0.0, a);
  const GeoPoint p2 = map_to_gps(30.0, 40.0, a);
  const UtmCoord u1 = gps_to_utm(p1), u2 = gps_to_utm(p2);
  const double utm_dist = std::hypot(u2.easting - u1.easting, u2.northing - u1.northing);
  CHECK(utm_dist == Catch::Approx(50.0).margin(1e-6));
}
