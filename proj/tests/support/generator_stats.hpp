#pragma once

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phaselink/synth.hpp"

namespace phaselink::testing {

struct StatResult {
  std::string name;
  double statistic = 0.0;
  double p_value = 0.0;
};

// Equal-width histogram for a chi-square goodness-of-fit test against uniform.
class UniformHistogram {
 public:
  UniformHistogram(double lo, double hi, int bins) : lo_(lo), hi_(hi), counts_(bins, 0) {}

  void add(double v) {
    const auto bins = static_cast<double>(counts_.size());
    auto k = static_cast<std::int64_t>(std::floor((v - lo_) / (hi_ - lo_) * bins));
    k = std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(counts_.size()) - 1);
    ++counts_[static_cast<std::size_t>(k)];
  }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }

  StatResult chi_square(const std::string& name) const {
    const double expected = static_cast<double>(total()) / static_cast<double>(counts_.size());
    double stat = 0.0;
    for (auto c : counts_) stat += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(counts_.size() - 1));
    return {name, stat, boost::math::cdf(boost::math::complement(dist, stat))};
  }

  std::vector<std::uint64_t>& counts() { return counts_; }

 private:
  double lo_, hi_;
  std::vector<std::uint64_t> counts_;
};

// Two-sided exact binomial test (doubled smaller tail, capped at 1).
inline StatResult binomial_test(const std::string& name, std::uint64_t successes,
                                std::uint64_t trials, double p) {
  boost::math::binomial dist(static_cast<double>(trials), p);
  const double k = static_cast<double>(successes);
  const double lower = boost::math::cdf(dist, k);
  const double upper = k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1));
  return {name, k / static_cast<double>(trials), std::min(1.0, 2.0 * std::min(lower, upper))};
}

/// Draws n samples with the given config and tests each generator rule.
inline std::vector<StatResult> generator_statistics(const SynthConfig& cfg, const Network& net,
                                                    const LayeredModel& model, std::size_t n) {
  UniformHistogram events(-0.5, cfg.max_events + 0.5, cfg.max_events + 1);
  UniformHistogram depth(cfg.depth_km.lo, cfg.depth_km.hi, 25);
  UniformHistogram error(cfg.pick_error_s.lo, cfg.pick_error_s.hi, 20);
  std::uint64_t arrivals = 0, discarded = 0, n_events = 0, reassigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(cfg.seed, i);
    SynthTrace tr;
    generate_subsequence(cfg, net, model, rng, &tr);
    events.add(tr.n_events);
    for (double d : tr.depths) depth.add(d);
    for (double e : tr.pick_errors) error.add(e);
    arrivals += tr.n_arrivals;
    discarded += tr.n_discarded;
    n_events += static_cast<std::uint64_t>(tr.n_events);
    reassigned += static_cast<std::uint64_t>(tr.n_reassigned);
  }
  return {events.chi_square("event count uniform"), depth.chi_square("depth uniform"),
          error.chi_square("pick error uniform"),
          binomial_test("discard rate", discarded, arrivals, cfg.discard_prob),
          binomial_test("reassignment rate", reassigned, n_events, cfg.reassign_prob)};
}

}  // namespace phaselink::testing
