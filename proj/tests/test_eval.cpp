#include <gtest/gtest.h>

#include <numeric>

#include "phaselink/eval.hpp"
#include "phaselink/rng.hpp"

using namespace phaselink;

namespace {

PickSet span(std::size_t first, std::size_t count) {
  PickSet s(count);
  std::iota(s.begin(), s.end(), first);
  return s;
}

// Brute force over every pair, independent of the inverted index in score().
double brute_jaccard(const PickSet& a, const PickSet& b) {
  std::size_t inter = 0;
  for (auto x : a)
    for (auto y : b) inter += x == y;
  const std::size_t uni = a.size() + b.size() - inter;
  return uni ? double(inter) / double(uni) : 0.0;
}

std::vector<PickSet> random_partition(Rng& rng, std::size_t n_picks, std::size_t n_sets) {
  std::vector<PickSet> sets(n_sets);
  for (std::size_t p = 0; p < n_picks; ++p) {
    const auto k = rng.uniform_int(-1, static_cast<std::int64_t>(n_sets) - 1);
    if (k >= 0) sets[static_cast<std::size_t>(k)].push_back(p);
  }
  std::erase_if(sets, [](const PickSet& s) { return s.empty(); });
  return sets;
}

}  // namespace

TEST(Jaccard, Examples) {
  // |A| = 8, best B shares 6 with |B| = 8
  const PickSet a = span(0, 8);
  const std::vector<PickSet> truth{span(2, 8), span(100, 8)};
  EXPECT_DOUBLE_EQ(jaccard_p(a, truth), 0.6);
  EXPECT_DOUBLE_EQ(jaccard_p(a, {a}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard_p(a, {span(50, 3)}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_p(a, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_p({}, truth), 0.0);

  // truth of 7, best detection of 7 shares 5: 5 / 9
  const PickSet t = span(0, 7);
  const std::vector<PickSet> det{span(2, 7), span(5, 3), span(40, 9)};
  EXPECT_DOUBLE_EQ(jaccard_r(t, det), 5.0 / 9.0);
  EXPECT_DOUBLE_EQ(jaccard_r(t, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard_r(t, {t}), 1.0);
}

TEST(Score, IdentityScoresOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto truth = random_partition(rng, 300, 1 + static_cast<std::size_t>(trial % 12));
    const auto r = score(truth, truth);
    EXPECT_EQ(r.event_precision, 1.0);
    EXPECT_EQ(r.event_recall, 1.0);
    EXPECT_EQ(r.phase_precision, 1.0);
    EXPECT_EQ(r.phase_recall, 1.0);
    EXPECT_EQ(r.d, truth.size());
  }
}

TEST(Score, EmptyCatalogAndEmptyTruth) {
  const std::vector<PickSet> truth{span(0, 10), span(20, 10)};
  const auto r = score({}, truth);
  EXPECT_EQ(r.event_recall, 0.0);
  EXPECT_EQ(r.phase_recall, 0.0);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_EQ(r.event_precision, 1.0);
  const auto q = score(truth, {});
  EXPECT_TRUE(q.recall_undefined);
  EXPECT_EQ(q.event_precision, 0.0);
}

TEST(Score, FalsePickClusterScoresZero) {
  const std::vector<PickSet> truth{span(0, 10)};
  const auto r = score({span(100, 9)}, truth);
  EXPECT_EQ(r.event_precision, 0.0);
  EXPECT_EQ(r.phase_precision, 0.0);
}

TEST(Score, MatchesBruteForce) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto truth = random_partition(rng, 200, 8);
    // detections: random subsets, possibly overlapping truth events and each other
    std::vector<PickSet> det;
    for (int k = 0; k < 6; ++k) {
      PickSet d;
      const auto lo = static_cast<std::size_t>(rng.uniform_int(0, 180));
      for (std::size_t p = lo; p < lo + 40; ++p)
        if (rng.bernoulli(0.5)) d.push_back(p);
      if (!d.empty()) det.push_back(d);
    }
    const auto r = score(det, truth);
    std::size_t ok = 0;
    double jp = 0;
    for (const auto& d : det) {
      double best = 0;
      for (const auto& t : truth) best = std::max(best, brute_jaccard(d, t));
      ok += best >= 0.5;
      jp += best;
      EXPECT_DOUBLE_EQ(best, jaccard_p(d, truth));
    }
    std::size_t found = 0;
    double jr = 0;
    for (const auto& t : truth) {
      double best = 0;
      for (const auto& d : det) best = std::max(best, brute_jaccard(d, t));
      found += best >= 0.5;
      jr += best;
    }
    EXPECT_DOUBLE_EQ(r.event_precision, double(ok) / det.size());
    EXPECT_DOUBLE_EQ(r.event_recall, double(found) / truth.size());
    EXPECT_NEAR(r.phase_precision, jp / det.size(), 1e-12);
    EXPECT_NEAR(r.phase_recall, jr / truth.size(), 1e-12);
    for (double v : {r.event_precision, r.event_recall, r.phase_precision, r.phase_recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Score, TruthSetsSkipUnobservedEvents) {
  GroundTruth t;
  t.events.resize(3);
  t.events[0].picks = {4, 2};
  t.events[2].picks = {7};
  const auto sets = truth_sets(t);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0], (PickSet{2, 4}));
}

TEST(Sweep, RecallNonIncreasingInNMin) {
  Rng rng(21);
  const auto truth = random_partition(rng, 2000, 120);
  std::vector<Cluster> unfiltered;
  for (const auto& t : truth) {
    Cluster c;
    for (auto p : t)
      if (rng.bernoulli(0.8)) c.picks.push_back(p);
    if (!c.picks.empty()) unfiltered.push_back(c);
  }
  const auto rows = pr_sweep(unfiltered, truth);
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows.front().n_min, 8);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i].metrics.event_recall, rows[i - 1].metrics.event_recall);
    EXPECT_LE(rows[i].metrics.phase_recall, rows[i - 1].metrics.phase_recall);
  }
  const auto beyond = pr_sweep(unfiltered, truth, 1000, 1000);
  EXPECT_EQ(beyond[0].metrics.event_recall, 0.0);
}
