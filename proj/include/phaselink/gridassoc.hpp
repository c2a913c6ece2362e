#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phaselink/aggregate.hpp"
#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/parallel.hpp"
#include "phaselink/pick.hpp"
#include "phaselink/synth.hpp"
#include "phaselink/velmod.hpp"

namespace phaselink {

/// Precomputed first-arrival times from every grid node to every station.
struct TravelTimeGrid {
  std::vector<Hypocenter> nodes;
  std::size_t n_stations = 0;
  double spacing_km = 0.0;
  std::vector<float> times;  // [node][station][phase]
  std::vector<float> node_station_km;  // [node][station] epicentral distance

  double time(std::size_t node, std::size_t station, Phase phase) const {
    return times[(node * n_stations + station) * 2 + static_cast<std::size_t>(phase)];
  }
  double distance(std::size_t node, std::size_t station) const {
    return node_station_km[node * n_stations + station];
  }
  double max_time() const {
    return times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  }
  std::size_t size() const noexcept { return nodes.size(); }
};

inline constexpr std::size_t kDefaultGridMemoryCap = std::size_t{1} << 30;

/// Table for an explicit node list. Throws before allocating when the table
/// would exceed `memory_cap` bytes.
inline TravelTimeGrid build_grid_at(std::vector<Hypocenter> nodes, const Network& net,
                                    const LayeredModel& model,
                                    std::size_t memory_cap = kDefaultGridMemoryCap,
                                    unsigned workers = 1) {
  const std::size_t entries = nodes.size() * net.size();
  const std::size_t bytes = entries * (2 + 1) * sizeof(float);
  if (bytes > memory_cap)
    throw InvariantError("travel-time grid needs " + std::to_string(bytes) +
                         " bytes, above the cap of " + std::to_string(memory_cap));
  TravelTimeGrid grid;
  grid.nodes = std::move(nodes);
  grid.n_stations = net.size();
  grid.times.resize(entries * 2);
  grid.node_station_km.resize(entries);
  parallel_for(grid.nodes.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      const Hypocenter& h = grid.nodes[n];
      for (std::size_t s = 0; s < net.size(); ++s) {
        const double d = epicentral_distance_km(h.epicenter, net.stations[s].location);
        grid.node_station_km[n * net.size() + s] = static_cast<float>(d);
        for (Phase ph : {Phase::P, Phase::S})
          grid.times[(n * net.size() + s) * 2 + static_cast<std::size_t>(ph)] =
              static_cast<float>(travel_time(model, h.depth_km, d, ph));
      }
    }
  });
  return grid;
}

/// Regular lattice over `region` with roughly `spacing_km` between nodes (edges
/// included) at each of `depth_levels`.
inline TravelTimeGrid build_grid(const Region& region, const std::vector<double>& depth_levels,
                                 double spacing_km, const Network& net, const LayeredModel& model,
                                 std::size_t memory_cap = kDefaultGridMemoryCap,
                                 unsigned workers = 1) {
  region.validate();
  if (!(spacing_km > 0.0)) throw InvariantError("grid spacing must be > 0");
  if (depth_levels.empty()) throw InvariantError("grid needs at least one depth level");
  const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
  const double lat_span_km = (region.lat_max - region.lat_min) * km_per_deg;
  const double lon_span_km = (region.lon_max - region.lon_min) * km_per_deg *
                             std::cos(region.center().lat * std::numbers::pi / 180.0);
  const auto n_lat = static_cast<std::size_t>(std::ceil(lat_span_km / spacing_km)) + 1;
  const auto n_lon = static_cast<std::size_t>(std::ceil(lon_span_km / spacing_km)) + 1;
  const std::size_t count = n_lat * n_lon * depth_levels.size();
  if (count * net.size() * 3 * sizeof(float) > memory_cap)
    throw InvariantError("travel-time grid with " + std::to_string(count) +
                         " nodes exceeds the memory cap");
  std::vector<Hypocenter> nodes;
  nodes.reserve(count);
  for (double depth : depth_levels) {
    if (!(depth >= 0.0)) throw InvariantError("grid depth levels must be >= 0");
    for (std::size_t i = 0; i < n_lat; ++i)
      for (std::size_t j = 0; j < n_lon; ++j) {
        UnitPoint u{static_cast<double>(j) / static_cast<double>(n_lon - 1),
                    static_cast<double>(i) / static_cast<double>(n_lat - 1)};
        nodes.push_back({denormalize(u, region), depth});
      }
  }
  TravelTimeGrid grid = build_grid_at(std::move(nodes), net, model, memory_cap, workers);
  grid.spacing_km = spacing_km;
  return grid;
}

struct GridParams {
  double residual_tol = 1.5;       // s
  int min_picks = 8;               // distinct station-phase matches to declare an event
  double origin_time_step = 0.25;  // s
  double dedup_window = 2.0;       // s; no second origin this close to an accepted one
  double max_distance_km = 100.0;  // stations farther from a node are ignored

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(residual_tol > 0.0)) out.emplace_back("residual_tol must be > 0");
    if (min_picks < 1) out.emplace_back("min_picks must be >= 1");
    if (!(origin_time_step > 0.0)) out.emplace_back("origin_time_step must be > 0");
    if (!(dedup_window > 0.0)) out.emplace_back("dedup_window must be > 0");
    if (!(max_distance_km > 0.0)) out.emplace_back("max_distance_km must be > 0");
    return out;
  }
};

struct GridEvent {
  Cluster cluster;
  std::size_t node = 0;
  double origin_time = 0.0;
};

/// Greedy back-projection association.
///
/// The earliest unused pick seeds a search: for every node (within range of the
/// seed station) and every origin time on a step lattice consistent with the
/// seed, the score is the number of distinct station-phase pairs with an unused
/// pick within residual_tol of the predicted arrival. The best (node, origin)
/// becomes an event if it reaches min_picks and no accepted origin lies within
/// dedup_window; its matching picks, one per station-phase (smallest residual),
/// are consumed. Otherwise the seed is left unassociated.
inline std::vector<GridEvent> grid_associate(const std::vector<Pick>& picks,
                                             const TravelTimeGrid& grid, const GridParams& params) {
  if (const auto p = params.problems(); !p.empty()) throw InvariantError("grid: " + join_problems(p));
  if (!is_time_sorted(picks)) throw UnsortedStreamError("grid_associate: picks not time-sorted");
  std::vector<GridEvent> events;
  if (picks.empty() || grid.size() == 0) return events;
  for (const auto& p : picks)
    if (p.station >= grid.n_stations) throw InvariantError("pick station outside grid table");

  const double tol = params.residual_tol;
  const double span = grid.max_time() + 2.0 * tol;
  const auto lattice = static_cast<int>(std::floor(tol / params.origin_time_step + 1e-9));
  std::vector<bool> used(picks.size(), false);
  std::vector<double> accepted_origins;  // kept sorted

  struct Match {
    double origin;
    std::uint32_t key;
    std::size_t pick;
  };
  std::vector<Match> matches;
  std::vector<std::uint32_t> stamp(grid.n_stations * 2, 0);
  std::uint32_t epoch = 0;

  auto suppressed = [&](double origin) {
    auto it = std::lower_bound(accepted_origins.begin(), accepted_origins.end(),
                               origin - params.dedup_window);
    return it != accepted_origins.end() && *it <= origin + params.dedup_window;
  };

  std::size_t cursor = 0;
  while (cursor < picks.size()) {
    if (used[cursor]) {
      ++cursor;
      continue;
    }
    const Pick& seed = picks[cursor];
    const double t_end = seed.time + span;
    std::size_t last = cursor;
    while (last < picks.size() && picks[last].time <= t_end) ++last;

    int best_count = 0;
    double best_misfit = std::numeric_limits<double>::infinity();
    std::size_t best_node = 0;
    double best_origin = 0.0;
    for (std::size_t node = 0; node < grid.size(); ++node) {
      if (grid.distance(node, seed.station) > params.max_distance_km) continue;
      const double o_seed = seed.time - grid.time(node, seed.station, seed.phase);
      matches.clear();
      for (std::size_t i = cursor; i < last; ++i) {
        if (used[i]) continue;
        const Pick& p = picks[i];
        if (grid.distance(node, p.station) > params.max_distance_km) continue;
        const double o = p.time - grid.time(node, p.station, p.phase);
        if (std::abs(o - o_seed) <= 2.0 * tol)
          matches.push_back({o, p.station * 2 + static_cast<std::uint32_t>(p.phase), i});
      }
      if (static_cast<int>(matches.size()) < params.min_picks) continue;
      for (int k = -lattice; k <= lattice; ++k) {
        const double origin = o_seed + k * params.origin_time_step;
        if (suppressed(origin)) continue;
        ++epoch;
        int count = 0;
        double misfit = 0.0;
        for (const auto& m : matches) {
          const double r = std::abs(m.origin - origin);
          if (r > tol) continue;
          misfit += r;
          if (stamp[m.key] != epoch) {
            stamp[m.key] = epoch;
            ++count;
          }
        }
        if (count > best_count || (count == best_count && misfit < best_misfit)) {
          best_count = count;
          best_misfit = misfit;
          best_node = node;
          best_origin = origin;
        }
      }
    }

    if (best_count < params.min_picks) {
      ++cursor;
      continue;
    }
    // Consume the best-fitting pick of every matching station-phase.
    std::vector<std::pair<double, std::size_t>> chosen(grid.n_stations * 2,
                                                       {std::numeric_limits<double>::infinity(), 0});
    for (std::size_t i = cursor; i < last; ++i) {
      if (used[i]) continue;
      const Pick& p = picks[i];
      if (grid.distance(best_node, p.station) > params.max_distance_km) continue;
      const double r = std::abs(p.time - grid.time(best_node, p.station, p.phase) - best_origin);
      if (r > tol) continue;
      auto& slot = chosen[p.station * 2 + static_cast<std::size_t>(p.phase)];
      if (r < slot.first) slot = {r, i};
    }
    GridEvent ev;
    ev.node = best_node;
    ev.origin_time = best_origin;
    for (const auto& [r, i] : chosen) {
      if (!std::isfinite(r)) continue;
      used[i] = true;
      ev.cluster.picks.push_back(i);
    }
    std::sort(ev.cluster.picks.begin(), ev.cluster.picks.end());
    ev.cluster.roots = {cursor};
    accepted_origins.insert(
        std::upper_bound(accepted_origins.begin(), accepted_origins.end(), best_origin),
        best_origin);
    events.push_back(std::move(ev));
  }
  return events;
}

inline std::vector<Cluster> grid_clusters(const std::vector<GridEvent>& events) {
  std::vector<Cluster> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.cluster);
  Aggregator::sort_clusters(out);
  return out;
}

}  // namespace phaselink
