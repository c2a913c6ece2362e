#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "phaselink/geo.hpp"
#include "phaselink/rng.hpp"

using namespace phaselink;

namespace {

const Region kRegion{32.0, 37.0, -120.0, -114.0};

// Chord length on the unit sphere converted to arc length: an independent
// route to the great-circle distance.
double chord_distance_km(GeoPoint a, GeoPoint b) {
  const double d = std::numbers::pi / 180.0;
  auto xyz = [&](GeoPoint p) {
    return std::array<double, 3>{std::cos(p.lat * d) * std::cos(p.lon * d),
                                 std::cos(p.lat * d) * std::sin(p.lon * d), std::sin(p.lat * d)};
  };
  const auto u = xyz(a), v = xyz(b);
  const double chord =
      std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * kEarthRadiusKm * std::asin(chord / 2.0);
}

}  // namespace

TEST(Normalize, CornersAndMidpoint) {
  const auto lo = normalize({kRegion.lat_min, kRegion.lon_min}, kRegion);
  EXPECT_DOUBLE_EQ(lo.x, 0.0);
  EXPECT_DOUBLE_EQ(lo.y, 0.0);
  const auto mid = normalize(kRegion.center(), kRegion);
  EXPECT_DOUBLE_EQ(mid.x, 0.5);
  EXPECT_DOUBLE_EQ(mid.y, 0.5);
  EXPECT_NEAR(normalize({34.0, -117.0}, kRegion).y, 0.4, 1e-15);
}

TEST(Normalize, OutsideRegionThrows) {
  EXPECT_THROW(normalize({31.9, -117.0}, kRegion), OutOfRegionError);
  EXPECT_THROW(normalize({33.0, -113.0}, kRegion), OutOfRegionError);
}

TEST(Normalize, InverseAndOrderPreserving) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint a{rng.uniform(kRegion.lat_min, kRegion.lat_max),
               rng.uniform(kRegion.lon_min, kRegion.lon_max)};
    GeoPoint b{rng.uniform(kRegion.lat_min, kRegion.lat_max),
               rng.uniform(kRegion.lon_min, kRegion.lon_max)};
    const auto ua = normalize(a, kRegion), ub = normalize(b, kRegion);
    const auto back = denormalize(ua, kRegion);
    EXPECT_NEAR(back.lat, a.lat, 1e-12 * std::abs(a.lat));
    EXPECT_NEAR(back.lon, a.lon, 1e-12 * std::abs(a.lon));
    EXPECT_EQ(a.lat < b.lat, ua.y < ub.y);
    EXPECT_EQ(a.lon < b.lon, ua.x < ub.x);
  }
}

TEST(Region, RejectsInvertedBounds) {
  EXPECT_THROW((Region{1.0, 0.0, 0.0, 1.0}.validate()), InvariantError);
  EXPECT_THROW((Region{0.0, 1.0, 2.0, 1.0}.validate()), InvariantError);
}

TEST(Distance, Examples) {
  EXPECT_EQ(epicentral_distance_km({33.0, -116.0}, {33.0, -116.0}), 0.0);
  EXPECT_NEAR(epicentral_distance_km({10.0, 20.0}, {11.0, 20.0}), 111.195, 1e-3);
  EXPECT_NEAR(epicentral_distance_km({10.0, 20.0}, {11.0, 20.0}), 6371.0 * std::numbers::pi / 180.0,
              1e-9);
  const double d60 = epicentral_distance_km({60.0, 0.0}, {60.0, 1.0});
  EXPECT_NEAR(d60, chord_distance_km({60.0, 0.0}, {60.0, 1.0}), 1e-9);
  EXPECT_NEAR(d60, 55.6, 0.05);
}

TEST(Distance, MetricProperties) {
  Rng rng(5);
  auto draw = [&] { return GeoPoint{rng.uniform(30.0, 40.0), rng.uniform(-120.0, -110.0)}; };
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint a = draw(), b = draw(), c = draw();
    const double ab = epicentral_distance_km(a, b);
    EXPECT_DOUBLE_EQ(ab, epicentral_distance_km(b, a));
    EXPECT_GT(ab, 0.0);
    EXPECT_NEAR(ab, chord_distance_km(a, b), 1e-8);
    EXPECT_LE(ab, epicentral_distance_km(a, c) + epicentral_distance_km(c, b) + 1e-9);
  }
}

TEST(Stations, ParsesCsvAndIgnoresElevation) {
  std::istringstream in("id,lat,lon,elevation\n# comment\nAAA,33.1,-116.5,120\nBBB, 33.9 ,-116.1,7\n");
  const auto st = read_stations(in);
  ASSERT_EQ(st.size(), 2u);
  EXPECT_EQ(st[1].id, "BBB");
  EXPECT_DOUBLE_EQ(st[1].location.lat, 33.9);
}

TEST(Stations, ReportsLineOfBadRow) {
  std::istringstream in("id,lat,lon\nAAA,33.1,-116.5\nBBB,north,-116.1\n");
  try {
    read_stations(in, "net.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("net.csv:3"), std::string::npos);
  }
}

TEST(Stations, MissingHeaderColumns) {
  std::istringstream in("name,lat,lon\nAAA,33.1,-116.5\n");
  EXPECT_THROW(read_stations(in), ParseError);
}

TEST(Stations, BundledNetworkFitsRegion) {
  const auto st = load_stations(std::string(PHASELINK_DATA_DIR) + "/stations.csv");
  EXPECT_EQ(st.size(), 40u);
  Network net(st, Region{33.0, 34.0, -117.0, -115.8});
  for (const auto& u : net.unit) {
    EXPECT_GE(u.x, 0.0);
    EXPECT_LE(u.x, 1.0);
  }
}
