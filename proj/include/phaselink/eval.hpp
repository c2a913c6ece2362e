#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "phaselink/aggregate.hpp"
#include "phaselink/synth.hpp"

namespace phaselink {

using PickSet = std::vector<std::size_t>;  // sorted, unique

inline std::size_t intersection_size(const PickSet& a, const PickSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline double jaccard(const PickSet& a, const PickSet& b) {
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Best Jaccard overlap of a detected cluster with any truth event; 0 when either is empty.
inline double jaccard_p(const PickSet& detected, const std::vector<PickSet>& truth) {
  if (detected.empty()) return 0.0;
  double best = 0.0;
  for (const auto& b : truth) best = std::max(best, jaccard(detected, b));
  return best;
}

/// Best Jaccard overlap of a truth event with any detection; 0 when either is empty.
inline double jaccard_r(const PickSet& truth_event, const std::vector<PickSet>& detections) {
  if (truth_event.empty()) return 0.0;
  double best = 0.0;
  for (const auto& a : detections) best = std::max(best, jaccard(a, truth_event));
  return best;
}

struct MetricsReport {
  double event_precision = 1.0;
  double event_recall = 1.0;
  double phase_precision = 1.0;  // mean J^p over detections
  double phase_recall = 1.0;     // mean J^r over truth events
  std::size_t d = 0;             // detections
  std::size_t c = 0;             // truth events
  bool precision_undefined = false;  // d == 0, precision reported as 1
  bool recall_undefined = false;     // c == 0, recall reported as 1
};

inline std::vector<PickSet> truth_sets(const GroundTruth& truth) {
  std::vector<PickSet> out;
  for (const auto& e : truth.events)
    if (!e.picks.empty()) {
      PickSet s = e.picks;
      std::sort(s.begin(), s.end());
      out.push_back(std::move(s));
    }
  return out;
}

inline std::vector<PickSet> cluster_sets(const std::vector<Cluster>& clusters) {
  std::vector<PickSet> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(c.picks);
  return out;
}

/// Event- and phase-level scores. A detection succeeds when J^p >= threshold,
/// a truth event is recovered when J^r >= threshold. Truth sets must be
/// disjoint; picks outside every truth set (false picks) only enlarge unions.
inline MetricsReport score(const std::vector<PickSet>& detections,
                           const std::vector<PickSet>& truth, double success_threshold = 0.5) {
  MetricsReport r;
  r.d = detections.size();
  r.c = truth.size();
  std::unordered_map<std::size_t, std::uint32_t> owner;
  for (std::uint32_t t = 0; t < truth.size(); ++t)
    for (std::size_t p : truth[t]) owner.emplace(p, t);

  std::vector<double> jr(truth.size(), 0.0);
  std::size_t successes = 0;
  double jp_sum = 0.0;
  std::unordered_map<std::uint32_t, std::size_t> overlap;
  for (const auto& a : detections) {
    overlap.clear();
    for (std::size_t p : a)
      if (auto it = owner.find(p); it != owner.end()) ++overlap[it->second];
    double jp = 0.0;
    for (const auto& [t, inter] : overlap) {
      const double j = static_cast<double>(inter) /
                       static_cast<double>(a.size() + truth[t].size() - inter);
      jp = std::max(jp, j);
      jr[t] = std::max(jr[t], j);
    }
    jp_sum += jp;
    if (jp >= success_threshold) ++successes;
  }
  if (r.d == 0) {
    r.precision_undefined = true;
  } else {
    r.event_precision = static_cast<double>(successes) / static_cast<double>(r.d);
    r.phase_precision = jp_sum / static_cast<double>(r.d);
  }
  if (r.c == 0) {
    r.recall_undefined = true;
  } else {
    std::size_t found = 0;
    double jr_sum = 0.0;
    for (double j : jr) {
      jr_sum += j;
      if (j >= success_threshold) ++found;
    }
    r.event_recall = static_cast<double>(found) / static_cast<double>(r.c);
    r.phase_recall = jr_sum / static_cast<double>(r.c);
  }
  return r;
}

inline MetricsReport score(const std::vector<Cluster>& catalog, const GroundTruth& truth,
                           double success_threshold = 0.5) {
  return score(cluster_sets(catalog), truth_sets(truth), success_threshold);
}

struct SweepRow {
  int n_min = 0;
  MetricsReport metrics;
};

/// Scores the same unfiltered clusters under each minimum size in [lo, hi].
inline std::vector<SweepRow> pr_sweep(const std::vector<Cluster>& unfiltered,
                                      const std::vector<PickSet>& truth, int lo = 8, int hi = 20,
                                      double success_threshold = 0.5) {
  std::vector<SweepRow> rows;
  for (int n_min = lo; n_min <= hi; ++n_min) {
    const auto kept = Aggregator::filter_min_size(unfiltered, n_min);
    rows.push_back({n_min, score(cluster_sets(kept), truth, success_threshold)});
  }
  return rows;
}

}  // namespace phaselink
