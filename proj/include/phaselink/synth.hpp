#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/pick.hpp"
#include "phaselink/rng.hpp"
#include "phaselink/velmod.hpp"

namespace phaselink {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool ordered() const noexcept { return lo <= hi; }
};

/// Parameters of the synthetic sub-sequence generator.
struct SynthConfig {
  int max_events = 20;
  Range depth_km{0.0, 25.0};
  double reassign_prob = 0.10;
  Range first_origin_s{-60.0, 60.0};
  Range inter_event_s{3.0, 20.0};
  Range max_dist_km{20.0, 100.0};
  double discard_prob = 0.5;
  Range pick_error_s{-0.5, 0.5};
  int false_pick_max = 500;
  double window_s = 120.0;
  int n_p = 500;
  std::uint64_t seed = 1;

  /// Every violated invariant, one message each.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    auto prob = [&](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) out.push_back(std::string(name) + " must be in [0,1]");
    };
    auto range = [&](const Range& r, const char* name) {
      if (!r.ordered()) out.push_back(std::string(name) + " range is not ordered");
    };
    if (max_events < 0) out.emplace_back("max_events must be >= 0");
    range(depth_km, "depth");
    if (depth_km.lo < 0.0) out.emplace_back("depth range must be >= 0");
    prob(reassign_prob, "reassign_prob");
    range(first_origin_s, "first_origin");
    range(inter_event_s, "inter_event");
    range(max_dist_km, "max_dist");
    prob(discard_prob, "discard_prob");
    range(pick_error_s, "pick_error");
    if (false_pick_max < 0) out.emplace_back("false_pick_max must be >= 0");
    if (!(window_s > 0.0)) out.emplace_back("window_s must be > 0");
    if (n_p < 1) out.emplace_back("n_p must be >= 1");
    return out;
  }

  void validate() const {
    const auto p = problems();
    if (!p.empty()) throw InvariantError("synth config: " + join_problems(p));
  }
};

struct Hypocenter {
  GeoPoint epicenter;
  double depth_km = 0.0;
};

struct TruthEvent {
  Hypocenter hypocenter;
  double origin_time = 0.0;
  bool reassigned = false;
  std::vector<std::size_t> picks;  // indices into the owning pick list
};

struct GroundTruth {
  std::vector<TruthEvent> events;

  /// Events that kept at least one pick.
  std::size_t observed_count() const {
    return static_cast<std::size_t>(std::count_if(
        events.begin(), events.end(), [](const TruthEvent& e) { return !e.picks.empty(); }));
  }
};

/// One labeled training window.
struct SynthSample {
  std::vector<Pick> picks;            // time-sorted, at most n_p
  std::vector<std::uint8_t> labels;   // length n_p, 1 = same event as picks[0]
  GroundTruth truth;
  bool empty = true;                  // no root pick exists
};

/// Raw draws made while generating, before any filtering. Used for distribution checks.
struct SynthTrace {
  int n_events = 0;
  std::vector<double> depths;          // one per hypocenter draw
  int n_reassigned = 0;
  std::size_t n_arrivals = 0;          // candidate picks before discarding
  std::size_t n_discarded = 0;
  std::vector<double> pick_errors;     // one per surviving arrival
  int n_false = 0;
};

namespace detail {

inline Hypocenter random_hypocenter(const Region& region, const Range& depth, Rng& rng) {
  UnitPoint u;
  u.y = rng.canonical();
  u.x = rng.canonical();
  Hypocenter h;
  h.epicenter = denormalize(u, region);
  h.depth_km = rng.uniform(depth.lo, depth.hi);
  return h;
}

// Appends the arrivals of one event at every station within max_dist.
inline void emit_arrivals(const Hypocenter& hypo, double origin, double max_dist, int event_id,
                          const Network& net, const LayeredModel& model, double discard_prob,
                          const Range& error, Rng& rng, std::vector<Pick>& out,
                          SynthTrace* trace) {
  for (std::uint32_t s = 0; s < net.size(); ++s) {
    const double dist = epicentral_distance_km(hypo.epicenter, net.stations[s].location);
    if (dist > max_dist) continue;
    for (Phase phase : {Phase::P, Phase::S}) {
      if (trace) ++trace->n_arrivals;
      if (rng.bernoulli(discard_prob)) {
        if (trace) ++trace->n_discarded;
        continue;
      }
      const double err = rng.uniform(error.lo, error.hi);
      if (trace) trace->pick_errors.push_back(err);
      const double t = origin + travel_time(model, hypo.depth_km, dist, phase) + err;
      out.push_back(Pick{s, t, phase, event_id});
    }
  }
}

// Sorts picks into stream order and fills each event's pick index list.
inline void index_truth(std::vector<Pick>& picks, GroundTruth& truth) {
  std::sort(picks.begin(), picks.end(), pick_order);
  for (auto& e : truth.events) e.picks.clear();
  for (std::size_t i = 0; i < picks.size(); ++i)
    if (picks[i].event_id != kFalsePick) truth.events[picks[i].event_id].picks.push_back(i);
}

}  // namespace detail

/// Labels for a window whose first pick is the root: the root and every pick of
/// its event are 1; a false root is linked only to itself.
inline std::vector<std::uint8_t> root_labels(const std::vector<Pick>& picks, std::size_t n_p) {
  std::vector<std::uint8_t> labels(n_p, 0);
  if (picks.empty()) return labels;
  const std::int32_t root_event = picks.front().event_id;
  labels[0] = 1;
  if (root_event == kFalsePick) return labels;
  for (std::size_t i = 1; i < picks.size() && i < n_p; ++i)
    labels[i] = picks[i].event_id == root_event ? 1 : 0;
  return labels;
}

/// Draws one labeled training window.
inline SynthSample generate_subsequence(const SynthConfig& cfg, const Network& net,
                                        const LayeredModel& model, Rng& rng,
                                        SynthTrace* trace = nullptr) {
  SynthSample sample;
  const int n_events = static_cast<int>(rng.uniform_int(0, cfg.max_events));
  if (trace) trace->n_events = n_events;

  // Every event starts at one shared hypocenter; each is independently moved
  // elsewhere with probability reassign_prob.
  const Hypocenter shared = detail::random_hypocenter(net.region, cfg.depth_km, rng);
  if (trace) trace->depths.push_back(shared.depth_km);
  std::vector<Pick> picks;
  double origin = 0.0;
  for (int e = 0; e < n_events; ++e) {
    TruthEvent ev;
    ev.hypocenter = shared;
    if (rng.bernoulli(cfg.reassign_prob)) {
      ev.hypocenter = detail::random_hypocenter(net.region, cfg.depth_km, rng);
      ev.reassigned = true;
      if (trace) {
        ++trace->n_reassigned;
        trace->depths.push_back(ev.hypocenter.depth_km);
      }
    }
    origin = e == 0 ? rng.uniform(cfg.first_origin_s.lo, cfg.first_origin_s.hi)
                    : origin + rng.uniform(cfg.inter_event_s.lo, cfg.inter_event_s.hi);
    ev.origin_time = origin;
    const double max_dist = rng.uniform(cfg.max_dist_km.lo, cfg.max_dist_km.hi);
    detail::emit_arrivals(ev.hypocenter, origin, max_dist, e, net, model, cfg.discard_prob,
                          cfg.pick_error_s, rng, picks, trace);
    sample.truth.events.push_back(std::move(ev));
  }

  const int n_false = static_cast<int>(rng.uniform_int(0, cfg.false_pick_max));
  if (trace) trace->n_false = n_false;
  const auto n_stations = static_cast<std::int64_t>(net.size());
  for (int f = 0; f < n_false; ++f) {
    Pick p;
    p.station = static_cast<std::uint32_t>(rng.uniform_int(0, n_stations - 1));
    p.time = rng.uniform(0.0, cfg.window_s);
    p.phase = rng.bernoulli(0.5) ? Phase::S : Phase::P;
    picks.push_back(p);
  }

  std::erase_if(picks, [&](const Pick& p) { return p.time < 0.0 || p.time > cfg.window_s; });
  std::sort(picks.begin(), picks.end(), pick_order);
  if (picks.size() > static_cast<std::size_t>(cfg.n_p)) picks.resize(cfg.n_p);
  sample.picks = std::move(picks);
  for (std::size_t i = 0; i < sample.picks.size(); ++i)
    if (sample.picks[i].event_id != kFalsePick)
      sample.truth.events[sample.picks[i].event_id].picks.push_back(i);
  sample.labels = root_labels(sample.picks, static_cast<std::size_t>(cfg.n_p));
  sample.empty = sample.picks.empty();
  return sample;
}

/// Parameters of a long continuous event sequence.
struct StressConfig {
  int n_events = 5000;
  double max_gap_s = 128.0;  // inter-event gaps ~ U[min_gap_s, max_gap_s]
  double min_gap_s = 0.0;
  Range depth_km{0.0, 25.0};
  Range max_dist_km{20.0, 100.0};
  Range pick_error_s{-0.5, 0.5};
  double discard_prob = 0.0;
};

struct PickStream {
  std::vector<Pick> picks;  // time-sorted
  GroundTruth truth;
};

/// A continuous multi-event pick stream with independent uniform hypocenters.
inline PickStream generate_stress_sequence(const StressConfig& cfg, const Network& net,
                                           const LayeredModel& model, Rng& rng) {
  if (cfg.n_events < 1) throw InvariantError("stress sequence needs n_events >= 1");
  if (!(cfg.max_gap_s > 0.0)) throw InvariantError("stress sequence needs max_gap_s > 0");
  if (!(cfg.min_gap_s >= 0.0 && cfg.min_gap_s <= cfg.max_gap_s))
    throw InvariantError("stress sequence needs 0 <= min_gap_s <= max_gap_s");
  PickStream out;
  double origin = 0.0;
  for (int e = 0; e < cfg.n_events; ++e) {
    if (e > 0) origin += rng.uniform(cfg.min_gap_s, cfg.max_gap_s);
    TruthEvent ev;
    ev.hypocenter = detail::random_hypocenter(net.region, cfg.depth_km, rng);
    ev.origin_time = origin;
    const double max_dist = rng.uniform(cfg.max_dist_km.lo, cfg.max_dist_km.hi);
    detail::emit_arrivals(ev.hypocenter, origin, max_dist, e, net, model, cfg.discard_prob,
                          cfg.pick_error_s, rng, out.picks, nullptr);
    out.truth.events.push_back(std::move(ev));
  }
  detail::index_truth(out.picks, out.truth);
  return out;
}

/// Mean spacing between consecutive origin times; nullopt for fewer than two events.
inline std::optional<double> mean_origin_gap(const GroundTruth& truth) {
  if (truth.events.size() < 2) return std::nullopt;
  return (truth.events.back().origin_time - truth.events.front().origin_time) /
         static_cast<double>(truth.events.size() - 1);
}

}  // namespace phaselink
