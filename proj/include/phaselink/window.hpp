#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/pick.hpp"

namespace phaselink {

inline constexpr std::size_t kFeatureWidth = 5;

/// One input row of the linker. Pad rows are all zero except pad_flag.
struct FeatureRow {
  double x = 0.0;           // station longitude, normalized
  double y = 0.0;           // station latitude, normalized
  double t_norm = 0.0;      // (t - t_root) / window_s
  double phase_flag = 0.0;  // 0 = P, 1 = S
  double pad_flag = 1.0;

  static FeatureRow pad() noexcept { return {}; }
  bool is_pad() const noexcept { return pad_flag != 0.0; }
};

/// Fixed-length window rooted at one pick.
struct SubSequence {
  std::size_t root_index = 0;            // global index of the root pick
  std::vector<FeatureRow> rows;          // length n_p; real rows first
  std::vector<std::size_t> members;      // global index of each real row

  std::size_t real_rows() const noexcept { return members.size(); }
};

class UnsortedStreamError : public Error {
 public:
  using Error::Error;
};

/// Feature rows for `count` picks starting at `first`; padded to n_p.
template <class PickAt>
std::vector<FeatureRow> featurize(PickAt&& pick_at, std::size_t count,
                                  const std::vector<UnitPoint>& station_xy, std::size_t n_p,
                                  double window_s) {
  std::vector<FeatureRow> rows(n_p, FeatureRow::pad());
  if (count == 0) return rows;
  const double t_root = pick_at(0).time;
  for (std::size_t i = 0; i < count && i < n_p; ++i) {
    const Pick& p = pick_at(i);
    if (p.station >= station_xy.size())
      throw InvariantError("pick references unknown station index " + std::to_string(p.station));
    const UnitPoint& xy = station_xy[p.station];
    rows[i] = FeatureRow{xy.x, xy.y, (p.time - t_root) / window_s,
                         p.phase == Phase::S ? 1.0 : 0.0, 0.0};
  }
  return rows;
}

inline std::vector<FeatureRow> featurize(const std::vector<Pick>& picks,
                                         const std::vector<UnitPoint>& station_xy,
                                         std::size_t n_p, double window_s) {
  return featurize([&](std::size_t i) -> const Pick& { return picks[i]; }, picks.size(),
                   station_xy, n_p, window_s);
}

/// Turns a time-sorted pick stream into one sub-sequence per root pick (stride 1).
///
/// Only the trailing window is buffered: a root is emitted as soon as its window
/// is known to be complete, i.e. n_p picks are buffered from it or a later pick
/// falls beyond t_root + window_s. The buffer never exceeds n_p + 1 picks.
class WindowStream {
 public:
  using Sink = std::function<void(SubSequence&&)>;

  WindowStream(std::vector<UnitPoint> station_xy, std::size_t n_p, double window_s)
      : station_xy_(std::move(station_xy)), n_p_(n_p), window_s_(window_s) {
    if (n_p_ == 0) throw InvariantError("n_p must be >= 1");
    if (!(window_s_ > 0.0)) throw InvariantError("window_s must be > 0");
  }

  /// Appends the next pick; it receives the next global index.
  void push(const Pick& pick, const Sink& sink) {
    if (!buffer_.empty() && pick.time < buffer_.back().pick.time)
      throw UnsortedStreamError("pick stream not sorted by time at index " +
                                std::to_string(next_index_));
    if (!std::isfinite(pick.time)) throw InvariantError("non-finite pick time");
    buffer_.push_back({next_index_++, pick});
    while (!buffer_.empty() && root_complete()) emit_front(sink);
  }

  /// Flushes every remaining root.
  void finish(const Sink& sink) {
    while (!buffer_.empty()) emit_front(sink);
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }
  std::size_t max_buffered() const noexcept { return max_buffered_; }
  std::size_t n_p() const noexcept { return n_p_; }
  double window_s() const noexcept { return window_s_; }

 private:
  struct Entry {
    std::size_t index;
    Pick pick;
  };

  bool root_complete() const {
    return buffer_.size() > n_p_ ||
           buffer_.back().pick.time - buffer_.front().pick.time > window_s_;
  }

  void emit_front(const Sink& sink) {
    max_buffered_ = std::max(max_buffered_, buffer_.size());
    const double t_root = buffer_.front().pick.time;
    std::size_t count = 0;
    while (count < buffer_.size() && count < n_p_ &&
           buffer_[count].pick.time - t_root <= window_s_)
      ++count;
    SubSequence sub;
    sub.root_index = buffer_.front().index;
    sub.rows = featurize([&](std::size_t i) -> const Pick& { return buffer_[i].pick; }, count,
                         station_xy_, n_p_, window_s_);
    sub.members.reserve(count);
    for (std::size_t i = 0; i < count; ++i) sub.members.push_back(buffer_[i].index);
    buffer_.pop_front();
    sink(std::move(sub));
  }

  std::vector<UnitPoint> station_xy_;
  std::size_t n_p_;
  double window_s_;
  std::deque<Entry> buffer_;
  std::size_t next_index_ = 0;
  std::size_t max_buffered_ = 0;
};

/// Batch form of WindowStream: exactly picks.size() sub-sequences, in root order.
inline std::vector<SubSequence> build_subsequences(const std::vector<Pick>& picks,
                                                   const std::vector<UnitPoint>& station_xy,
                                                   std::size_t n_p, double window_s) {
  if (!is_time_sorted(picks)) throw UnsortedStreamError("pick stream not sorted by time");
  std::vector<SubSequence> out;
  out.reserve(picks.size());
  WindowStream stream(station_xy, n_p, window_s);
  const WindowStream::Sink sink = [&](SubSequence&& s) { out.push_back(std::move(s)); };
  for (const auto& p : picks) stream.push(p, sink);
  stream.finish(sink);
  return out;
}

}  // namespace phaselink
