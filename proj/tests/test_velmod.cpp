#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "phaselink/velmod.hpp"
#include "support/random_models.hpp"
#include "support/traveltime_oracle.hpp"

using namespace phaselink;

TEST(TravelTime, HalfSpaceSurfaceSource) {
  const LayeredModel m({{0.0, 6.0, 3.5}});
  EXPECT_NEAR(travel_time(m, 0.0, 30.0, Phase::P), 5.0, 1e-12);
}

TEST(TravelTime, HalfSpaceVerticalRay) {
  const LayeredModel m({{0.0, 5.0, 2.9}});
  EXPECT_NEAR(travel_time(m, 25.0, 0.0, Phase::P), 5.0, 1e-12);
}

TEST(TravelTime, HalfSpaceStraightRay) {
  const LayeredModel m({{0.0, 6.0, 3.5}});
  EXPECT_NEAR(travel_time(m, 8.0, 15.0, Phase::P), 17.0 / 6.0, 1e-10);
  EXPECT_NEAR(travel_time(m, 8.0, 15.0, Phase::S), 17.0 / 3.5, 1e-10);
}

TEST(TravelTime, TwoLayerMatchesScanOracle) {
  const LayeredModel m({{0.0, 5.5, 3.18}, {16.0, 6.3, 3.64}});
  const double t = travel_time(m, 8.0, 80.0, Phase::P);
  const double oracle = phaselink::testing::oracle_travel_time(m, 8.0, 80.0, Phase::P);
  EXPECT_NEAR(t, oracle, 1e-4);
  EXPECT_NEAR(t, std::hypot(8.0, 80.0) / 5.5, 1e-9);
  // Further out the refraction along the 16 km interface overtakes it.
  const double head = 120.0 / 6.3 + (16.0 + 8.0) * std::sqrt(1 / (5.5 * 5.5) - 1 / (6.3 * 6.3));
  EXPECT_NEAR(travel_time(m, 8.0, 120.0, Phase::P), head, 1e-9);
}

TEST(TravelTime, SourceOnInterfaceUsesLayerBelow) {
  const LayeredModel m({{0.0, 5.0, 2.9}, {10.0, 7.0, 4.0}});
  EXPECT_EQ(m.layer_at(10.0), 1u);
  // Vertical ray crosses only the top layer.
  EXPECT_NEAR(travel_time(m, 10.0, 0.0, Phase::P), 2.0, 1e-12);
  const double far = travel_time(m, 10.0, 90.0, Phase::P);
  EXPECT_NEAR(far, phaselink::testing::oracle_travel_time(m, 10.0, 90.0, Phase::P), 1e-4);
}

TEST(TravelTime, RejectsNegativeInputs) {
  const LayeredModel m({{0.0, 6.0, 3.5}});
  EXPECT_THROW(travel_time(m, -1.0, 3.0, Phase::P), std::invalid_argument);
  EXPECT_THROW(travel_time(m, 1.0, -3.0, Phase::P), std::invalid_argument);
}

TEST(TravelTime, DeepSourceInHalfSpace) {
  const LayeredModel m({{0.0, 5.5, 3.18}, {5.5, 6.3, 3.64}, {16.0, 6.7, 3.87}, {32.0, 7.8, 4.5}});
  const double t = travel_time(m, 60.0, 40.0, Phase::S);
  EXPECT_NEAR(t, phaselink::testing::oracle_travel_time(m, 60.0, 40.0, Phase::S), 1e-4);
}

TEST(TravelTime, MonotoneInDistanceAndPBeforeS) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const LayeredModel m = phaselink::testing::random_model(rng);
    const double depth = rng.uniform(0.0, 30.0);
    double prev_p = 0.0;
    for (double x = 0.0; x <= 100.0; x += 0.5) {
      const double tp = travel_time(m, depth, x, Phase::P);
      const double ts = travel_time(m, depth, x, Phase::S);
      EXPECT_GE(tp, prev_p - 1e-12) << "depth " << depth << " x " << x;
      EXPECT_LE(tp, ts);
      prev_p = tp;
    }
  }
}

TEST(TravelTime, AgreesWithOracleOnRandomCases) {
  Rng rng(2024);
  for (int i = 0; i < 60; ++i) {
    const auto c = phaselink::testing::random_case(rng);
    const double t = travel_time(c.model, c.depth, c.dist, c.phase);
    const double o = phaselink::testing::oracle_travel_time(c.model, c.depth, c.dist, c.phase, 200'000);
    EXPECT_NEAR(t, o, 1e-4) << "case " << i << " depth " << c.depth << " dist " << c.dist;
  }
}

TEST(ModelFile, ParsesLayersAndComments) {
  std::istringstream in("# crust\n0 5.5 3.18\n5.5 6.3 3.64  # mid\n\n16 6.7 3.87\n");
  const auto m = read_model(in);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_DOUBLE_EQ(m.top(2), 16.0);
  EXPECT_DOUBLE_EQ(m.layers()[1].vs, 3.64);
}

TEST(ModelFile, RejectsNonIncreasingDepth) {
  std::istringstream in("0 5.5 3.18\n8 6.3 3.64\n8 6.7 3.87\n");
  try {
    read_model(in, "m.vel");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("non-increasing depth"), std::string::npos);
  }
}

TEST(ModelFile, RejectsVpNotAboveVs) {
  std::istringstream in("0 3.0 3.0\n");
  EXPECT_THROW(read_model(in), ParseError);
}

TEST(ModelFile, RejectsMalformedRow) {
  std::istringstream in("0 5.5\n");
  EXPECT_THROW(read_model(in), ParseError);
  std::istringstream first("2 5.5 3.0\n");
  EXPECT_THROW(read_model(first), ParseError);
}

TEST(ModelFile, BundledModelLoads) {
  const auto m = load_model(std::string(PHASELINK_DATA_DIR) + "/socal.vel");
  EXPECT_EQ(m.size(), 4u);
}
