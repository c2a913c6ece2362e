#include <gtest/gtest.h>

#include <sstream>

#include "phaselink/config.hpp"
#include "support/desk.hpp"

using namespace phaselink;
using phaselink::testing::data_path;

namespace {

std::vector<std::string> problems_of(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  try {
    read_config(in, cfg, "t.cfg");
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& list, const std::string& s) {
  for (const auto& p : list)
    if (p.find(s) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  RunConfig cfg;
  EXPECT_TRUE(config_problems(cfg, {}).empty());
  EXPECT_EQ(cfg.agg.n_nuc, 8);
  EXPECT_EQ(cfg.agg.n_merge, 7);
  EXPECT_EQ(cfg.synth.max_events, 20);
}

TEST(Config, ReadsKeysAndComments) {
  RunConfig cfg;
  std::istringstream in(
      "# comment\n"
      "synth.n_p = 50   # trailing\n"
      "train.hidden=16\n"
      "\n"
      "grid.depths_km = 1, 3.5\n"
      "synth.depth_km = 2, 9\n"
      "aggregate.order = forward\n"
      "stress.run_grid = false\n");
  read_config(in, cfg);
  EXPECT_EQ(cfg.synth.n_p, 50);
  EXPECT_EQ(cfg.train.hidden, 16u);
  EXPECT_EQ(cfg.grid_depths, (std::vector<double>{1.0, 3.5}));
  EXPECT_EQ(cfg.synth.depth_km.lo, 2.0);
  EXPECT_EQ(cfg.synth.depth_km.hi, 9.0);
  EXPECT_EQ(cfg.order, ScanOrder::Forward);
  EXPECT_FALSE(cfg.stress_grid);
}

TEST(Config, EveryProblemIsReportedWithItsLine) {
  const auto p = problems_of(
      "synth.n_p = fifty\n"
      "nonsense\n"
      "no.such.key = 3\n"
      "train.hidden = 8\n"
      "aggregate.order = sideways\n");
  ASSERT_EQ(p.size(), 4u);
  EXPECT_TRUE(mentions(p, "t.cfg:1"));
  EXPECT_TRUE(mentions(p, "t.cfg:2"));
  EXPECT_TRUE(mentions(p, "no.such.key"));
  EXPECT_TRUE(mentions(p, "t.cfg:5"));
}

TEST(Config, InvariantViolationsAreAllListed) {
  RunConfig cfg;
  cfg.agg.n_merge = 9;
  cfg.threshold = 1.5;
  cfg.synth.discard_prob = -0.1;
  cfg.train.epochs = 0;
  cfg.workers = 0;
  const auto p = config_problems(cfg, {});
  EXPECT_TRUE(mentions(p, "n_merge"));
  EXPECT_TRUE(mentions(p, "link.threshold"));
  EXPECT_TRUE(mentions(p, "discard_prob"));
  EXPECT_TRUE(mentions(p, "epochs"));
  EXPECT_TRUE(mentions(p, "workers"));
  EXPECT_THROW(validate_config(cfg, {}), ConfigError);
}

TEST(Config, MissingFilesNameThePath) {
  RunConfig cfg;
  cfg.paths.stations = "/nonexistent/stations.csv";
  const auto p = config_problems(cfg, {.stations = true, .picks = true});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], "paths.stations: file not found: /nonexistent/stations.csv");
  EXPECT_EQ(p[1], "paths.picks is not set");
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  RunConfig cfg;
  load_config(data_path("desk.cfg"), cfg);
  EXPECT_TRUE(std::filesystem::exists(cfg.paths.stations)) << cfg.paths.stations;
  EXPECT_TRUE(std::filesystem::exists(cfg.paths.velocity_model));
  EXPECT_TRUE(config_problems(cfg, {.stations = true, .velocity_model = true}).empty());
}

TEST(Config, OverridesApplyAfterFile) {
  RunConfig cfg;
  load_config(data_path("desk.cfg"), cfg);
  apply_overrides(cfg, {"synth.n_p=20", "link.threshold = 0.7"});
  EXPECT_EQ(cfg.synth.n_p, 20);
  EXPECT_DOUBLE_EQ(cfg.threshold, 0.7);
  try {
    apply_overrides(cfg, {"synth.n_p", "bogus=1"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.problems().size(), 2u);
  }
}

TEST(Config, EchoRoundTrips) {
  RunConfig a;
  a.synth.n_p = 37;
  a.grid_depths = {1.5, 7.25};
  a.threshold = 0.625;
  a.order = ScanOrder::Forward;
  a.seed = 99;
  RunConfig b;
  std::istringstream in(config_text(a));
  read_config(in, b);
  EXPECT_EQ(config_text(a), config_text(b));
  EXPECT_EQ(config_json(a), config_json(b));
  EXPECT_EQ(config_json(b)["seed"], "99");
}

TEST(Config, PipelineOptionsCarryAggregationSettings) {
  RunConfig cfg;
  cfg.agg.n_min = 12;
  cfg.order = ScanOrder::Forward;
  const auto opt = cfg.pipeline();
  EXPECT_EQ(opt.agg.n_min, 12);
  EXPECT_EQ(opt.order, ScanOrder::Forward);
}
