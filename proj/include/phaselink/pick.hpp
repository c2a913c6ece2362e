#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "phaselink/velmod.hpp"

namespace phaselink {

/// Ground-truth event id carried by picks that belong to no event.
inline constexpr std::int32_t kFalsePick = -1;

struct Pick {
  std::uint32_t station = 0;  // index into the station list
  double time = 0.0;          // seconds
  Phase phase = Phase::P;
  std::int32_t event_id = kFalsePick;  // ground truth when known
};

/// Stream order: time, then station, then phase, then event id.
inline bool pick_order(const Pick& a, const Pick& b) noexcept {
  return std::tuple(a.time, a.station, a.phase, a.event_id) <
         std::tuple(b.time, b.station, b.phase, b.event_id);
}

inline bool is_time_sorted(const std::vector<Pick>& picks) noexcept {
  for (std::size_t i = 1; i < picks.size(); ++i)
    if (picks[i].time < picks[i - 1].time) return false;
  return true;
}

}  // namespace phaselink
