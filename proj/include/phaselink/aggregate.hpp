#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phaselink/error.hpp"
#include "phaselink/linker.hpp"
#include "phaselink/window.hpp"

namespace phaselink {

struct AggParams {
  int n_nuc = 8;    // linked picks needed for a window to nucleate a cluster
  int n_merge = 7;  // shared picks above which a candidate joins an existing cluster
  int n_min = 8;    // minimum size of a reported cluster

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (n_nuc < 1) out.emplace_back("n_nuc must be >= 1");
    if (n_merge < 1) out.emplace_back("n_merge must be >= 1");
    if (n_min < 1) out.emplace_back("n_min must be >= 1");
    if (n_merge > n_nuc - 1) out.emplace_back("n_merge must be <= n_nuc - 1");
    return out;
  }
  void validate() const {
    if (const auto p = problems(); !p.empty()) throw InvariantError("aggregation: " + join_problems(p));
  }
};

/// Picks declared to share one origin.
struct Cluster {
  std::vector<std::size_t> picks;  // sorted, unique global pick indices
  std::vector<std::size_t> roots;  // roots whose windows contributed

  std::size_t size() const noexcept { return picks.size(); }
};

/// Global indices of the picks a window links to its root.
struct LinkedSet {
  std::size_t root = 0;
  std::vector<std::size_t> picks;
};

inline LinkedSet linked_set(const SubSequence& sub, const Prediction& pred) {
  LinkedSet s;
  s.root = sub.root_index;
  for (std::size_t i = 0; i < sub.members.size(); ++i)
    if (pred.labels[i]) s.picks.push_back(sub.members[i]);
  std::sort(s.picks.begin(), s.picks.end());
  return s;
}

enum class ScanOrder {
  Reverse,  // batch: latest root first
  Forward,  // streaming: earliest root first, finished clusters retired early
};

/// Incremental nucleate-and-merge clustering of linked sets.
class Aggregator {
 public:
  explicit Aggregator(AggParams params) : params_(params) { params_.validate(); }

  /// Nucleates a candidate from `set` if it links at least n_nuc picks, then
  /// merges it into the existing cluster sharing the most picks when that count
  /// exceeds n_merge; otherwise the candidate becomes a new cluster. Ties go to
  /// the cluster whose earliest pick is earliest.
  void add(const LinkedSet& set) {
    if (set.picks.size() < static_cast<std::size_t>(params_.n_nuc)) return;
    ++nucleated_;
    touched_.clear();
    for (std::size_t p : set.picks) {
      auto it = owner_.find(p);
      if (it == owner_.end()) continue;
      for (std::uint32_t c : it->second) {
        if (counts_[c]++ == 0) touched_.push_back(c);
      }
    }
    std::uint32_t best = kNone;
    std::size_t best_count = 0;
    for (std::uint32_t c : touched_) {
      const std::size_t n = counts_[c];
      if (n > best_count || (n == best_count && best != kNone && earlier(c, best))) {
        best = c;
        best_count = n;
      }
    }
    for (std::uint32_t c : touched_) counts_[c] = 0;

    if (best != kNone && best_count > static_cast<std::size_t>(params_.n_merge)) {
      Slot& slot = slots_[best];
      std::vector<std::size_t> merged;
      merged.reserve(slot.cluster.picks.size() + set.picks.size());
      std::set_union(slot.cluster.picks.begin(), slot.cluster.picks.end(), set.picks.begin(),
                     set.picks.end(), std::back_inserter(merged));
      for (std::size_t p : set.picks)
        if (!std::binary_search(slot.cluster.picks.begin(), slot.cluster.picks.end(), p))
          owner_[p].push_back(best);
      slot.cluster.picks = std::move(merged);
      slot.cluster.roots.push_back(set.root);
      ++merges_;
      return;
    }
    const std::uint32_t id = new_slot();
    Slot& slot = slots_[id];
    slot.cluster.picks = set.picks;
    slot.cluster.roots = {set.root};
    for (std::size_t p : set.picks) owner_[p].push_back(id);
  }

  /// Hands every live cluster whose picks all precede `first_live_pick` to `sink`,
  /// if it has at least n_min picks, and frees it. Valid in forward order only.
  void retire_before(std::size_t first_live_pick, const std::function<void(Cluster&&)>& sink) {
    for (std::uint32_t id = 0; id < slots_.size(); ++id) {
      Slot& slot = slots_[id];
      if (!slot.live || slot.cluster.picks.back() >= first_live_pick) continue;
      release(id, sink);
    }
  }

  /// Every live cluster, unfiltered, ordered by earliest pick.
  std::vector<Cluster> clusters() const {
    std::vector<Cluster> out;
    for (const auto& s : slots_)
      if (s.live) out.push_back(s.cluster);
    sort_clusters(out);
    return out;
  }

  /// Live clusters with at least n_min picks, ordered by earliest pick.
  std::vector<Cluster> finish() const { return filter_min_size(clusters(), params_.n_min); }

  std::size_t live_clusters() const noexcept { return live_; }
  std::size_t nucleated() const noexcept { return nucleated_; }
  std::size_t merges() const noexcept { return merges_; }
  const AggParams& params() const noexcept { return params_; }

  static std::vector<Cluster> filter_min_size(std::vector<Cluster> clusters, int n_min) {
    std::erase_if(clusters, [&](const Cluster& c) {
      return c.picks.size() < static_cast<std::size_t>(n_min);
    });
    return clusters;
  }

  static void sort_clusters(std::vector<Cluster>& clusters) {
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
      return a.picks < b.picks;
    });
  }

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Slot {
    Cluster cluster;
    bool live = false;
  };

  bool earlier(std::uint32_t a, std::uint32_t b) const {
    const std::size_t fa = slots_[a].cluster.picks.front();
    const std::size_t fb = slots_[b].cluster.picks.front();
    return fa != fb ? fa < fb : a < b;
  }

  std::uint32_t new_slot() {
    std::uint32_t id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<std::uint32_t>(slots_.size());
      slots_.emplace_back();
      counts_.push_back(0);
    }
    slots_[id].live = true;
    ++live_;
    return id;
  }

  void release(std::uint32_t id, const std::function<void(Cluster&&)>& sink) {
    Slot& slot = slots_[id];
    for (std::size_t p : slot.cluster.picks) {
      auto it = owner_.find(p);
      if (it == owner_.end()) continue;
      std::erase(it->second, id);
      if (it->second.empty()) owner_.erase(it);
    }
    if (slot.cluster.picks.size() >= static_cast<std::size_t>(params_.n_min))
      sink(std::move(slot.cluster));
    slot.cluster = Cluster{};
    slot.live = false;
    --live_;
    free_.push_back(id);
  }

  AggParams params_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> touched_;
  std::unordered_map<std::size_t, std::vector<std::uint32_t>> owner_;
  std::size_t live_ = 0;
  std::size_t nucleated_ = 0;
  std::size_t merges_ = 0;
};

/// Clusters the linked sets in the given scan order; returns all clusters before
/// the n_min filter (use Aggregator::filter_min_size or associate()).
inline std::vector<Cluster> aggregate_unfiltered(std::vector<LinkedSet> sets, const AggParams& params,
                                                 ScanOrder order = ScanOrder::Reverse) {
  std::sort(sets.begin(), sets.end(), [&](const LinkedSet& a, const LinkedSet& b) {
    return order == ScanOrder::Reverse ? a.root > b.root : a.root < b.root;
  });
  Aggregator agg(params);
  for (const auto& s : sets) agg.add(s);
  return agg.clusters();
}

/// Full aggregation: nucleation, merging and the n_min size filter.
inline std::vector<Cluster> associate(std::vector<LinkedSet> sets, const AggParams& params,
                                      ScanOrder order = ScanOrder::Reverse) {
  return Aggregator::filter_min_size(aggregate_unfiltered(std::move(sets), params, order),
                                     params.n_min);
}

/// Picks that appear in more than one cluster.
inline std::size_t shared_pick_count(const std::vector<Cluster>& clusters) {
  std::unordered_map<std::size_t, int> seen;
  for (const auto& c : clusters)
    for (std::size_t p : c.picks) ++seen[p];
  return static_cast<std::size_t>(
      std::count_if(seen.begin(), seen.end(), [](const auto& kv) { return kv.second > 1; }));
}

struct PipelineOptions {
  std::size_t n_p = 50;
  double window_s = 120.0;
  AggParams agg;
  ScanOrder order = ScanOrder::Reverse;
  std::size_t batch = 256;  // sub-sequences per linker call
};

struct PipelineResult {
  std::vector<Cluster> clusters;     // after the n_min filter
  std::vector<Cluster> unfiltered;   // Reverse order only: before the n_min filter
  std::size_t n_subsequences = 0;
  std::size_t max_buffered_picks = 0;
  std::size_t max_live_clusters = 0;
  std::size_t shared_picks = 0;
};

/// Windowing, linking and aggregation over a time-sorted pick stream.
///
/// Reverse order keeps every linked set and scans them latest-first. Forward
/// order consumes windows as they complete and retires clusters that can no
/// longer grow, so memory stays bounded by the window plus live clusters.
inline PipelineResult run_association(const std::vector<Pick>& picks,
                                      const std::vector<UnitPoint>& station_xy,
                                      const Linker& linker, const PipelineOptions& opt,
                                      const std::function<void(Cluster&&)>& sink = {}) {
  opt.agg.validate();
  PipelineResult result;
  WindowStream stream(station_xy, opt.n_p, opt.window_s);
  std::vector<SubSequence> pending;
  std::vector<LinkedSet> sets;
  Aggregator agg(opt.agg);
  const std::function<void(Cluster&&)> collect =
      sink ? sink : std::function<void(Cluster&&)>([&](Cluster&& c) {
        result.clusters.push_back(std::move(c));
      });

  auto flush = [&] {
    if (pending.empty()) return;
    const auto preds = linker.link(pending);
    for (std::size_t i = 0; i < pending.size(); ++i) {
      LinkedSet s = linked_set(pending[i], preds[i]);
      if (opt.order == ScanOrder::Reverse) {
        if (s.picks.size() >= static_cast<std::size_t>(opt.agg.n_nuc)) sets.push_back(std::move(s));
      } else {
        agg.add(s);
        result.max_live_clusters = std::max(result.max_live_clusters, agg.live_clusters());
      }
    }
    if (opt.order == ScanOrder::Forward) agg.retire_before(pending.back().root_index + 1, collect);
    result.n_subsequences += pending.size();
    pending.clear();
  };
  const WindowStream::Sink on_window = [&](SubSequence&& s) {
    pending.push_back(std::move(s));
    if (pending.size() >= opt.batch) flush();
  };
  for (const auto& p : picks) stream.push(p, on_window);
  stream.finish(on_window);
  flush();
  result.max_buffered_picks = stream.max_buffered();

  if (opt.order == ScanOrder::Reverse) {
    result.unfiltered = aggregate_unfiltered(std::move(sets), opt.agg, ScanOrder::Reverse);
    for (const auto& c : result.unfiltered)
      if (c.size() >= static_cast<std::size_t>(opt.agg.n_min)) {
        Cluster copy = c;
        collect(std::move(copy));
      }
  } else {
    agg.retire_before(std::numeric_limits<std::size_t>::max(), collect);
  }
  if (!sink) {
    Aggregator::sort_clusters(result.clusters);
    result.shared_picks = shared_pick_count(result.clusters);
  }
  return result;
}

}  // namespace phaselink
