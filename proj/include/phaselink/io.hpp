#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "phaselink/aggregate.hpp"
#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/pick.hpp"
#include "phaselink/synth.hpp"

namespace phaselink {

inline bool is_jsonl_path(const std::string& path) {
  return path.ends_with(".jsonl") || path.ends_with(".json") || path.ends_with(".ndjson");
}

inline Phase parse_phase(const std::string& s, const std::string& source, std::size_t line) {
  if (s == "P" || s == "p") return Phase::P;
  if (s == "S" || s == "s") return Phase::S;
  throw ParseError(source, line, "unknown phase '" + s + "'");
}

namespace detail {

inline std::uint32_t station_index(const std::unordered_map<std::string, std::uint32_t>& ids,
                                   const std::string& id, const std::string& source,
                                   std::size_t line) {
  const auto it = ids.find(id);
  if (it == ids.end()) throw ParseError(source, line, "unknown station '" + id + "'");
  return it->second;
}

inline std::unordered_map<std::string, std::uint32_t> station_ids(const Network& net) {
  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::uint32_t i = 0; i < net.size(); ++i) ids.emplace(net.stations[i].id, i);
  return ids;
}

}  // namespace detail

/// Reads picks from CSV (`station_id,time_epoch_s,phase[,event_id]` with header; `time`
/// is accepted for the time column) or
/// JSON-lines (`{"station":..,"time":..,"phase":..,"event_id":..}`). An absent or
/// negative event id marks a false pick. Output is sorted into stream order.
inline std::vector<Pick> read_picks(std::istream& in, const Network& net, bool jsonl,
                                    const std::string& source = "picks") {
  const auto ids = detail::station_ids(net);
  std::vector<Pick> picks;
  std::string line;
  std::size_t lineno = 0;
  if (jsonl) {
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        Pick p;
        p.station = detail::station_index(ids, j.at("station").get<std::string>(), source, lineno);
        p.time = j.at("time").get<double>();
        p.phase = parse_phase(j.at("phase").get<std::string>(), source, lineno);
        p.event_id = j.contains("event_id") && !j["event_id"].is_null()
                         ? std::max(kFalsePick, j["event_id"].get<std::int32_t>())
                         : kFalsePick;
        picks.push_back(p);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
  } else {
    bool header = false;
    std::size_t c_station = 0, c_time = 1, c_phase = 2, c_event = std::string::npos;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto f = detail::split_csv(t);
      if (!header) {
        header = true;
        const auto col = [&](const char* name) {
          const auto it = std::find(f.begin(), f.end(), name);
          return it == f.end() ? std::string::npos : static_cast<std::size_t>(it - f.begin());
        };
        c_station = col("station_id");
        c_time = col("time_epoch_s");
        if (c_time == std::string::npos) c_time = col("time");
        c_phase = col("phase");
        c_event = col("event_id");
        if (c_station == std::string::npos || c_time == std::string::npos ||
            c_phase == std::string::npos)
          throw ParseError(source, lineno, "header must name station_id, time_epoch_s and phase");
        continue;
      }
      const std::size_t need = std::max({c_station, c_time, c_phase}) + 1;
      if (f.size() < need) throw ParseError(source, lineno, "too few columns");
      Pick p;
      p.station = detail::station_index(ids, f[c_station], source, lineno);
      p.time = detail::parse_double(f[c_time], source, lineno, "time");
      p.phase = parse_phase(f[c_phase], source, lineno);
      if (c_event != std::string::npos && c_event < f.size() && !f[c_event].empty()) {
        const double e = detail::parse_double(f[c_event], source, lineno, "event_id");
        p.event_id = e < 0 ? kFalsePick : static_cast<std::int32_t>(e);
      }
      picks.push_back(p);
    }
    if (!header) throw ParseError(source, lineno, "missing header");
  }
  std::stable_sort(picks.begin(), picks.end(), pick_order);
  return picks;
}

inline std::vector<Pick> load_picks(const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pick file: " + path);
  return read_picks(in, net, is_jsonl_path(path), path);
}

inline void write_picks_csv(std::ostream& out, const std::vector<Pick>& picks, const Network& net,
                            bool with_events = true) {
  out << "station_id,time_epoch_s,phase" << (with_events ? ",event_id" : "") << '\n';
  out.precision(12);
  for (const auto& p : picks) {
    out << net.stations.at(p.station).id << ',' << p.time << ',' << to_string(p.phase);
    if (with_events) out << ',' << p.event_id;
    out << '\n';
  }
}

/// Ground truth implied by the event ids of a pick list (indices into `picks`).
inline GroundTruth truth_from_picks(const std::vector<Pick>& picks) {
  std::map<std::int32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < picks.size(); ++i)
    if (picks[i].event_id != kFalsePick) groups[picks[i].event_id].push_back(i);
  GroundTruth t;
  for (auto& [id, idx] : groups) {
    TruthEvent e;
    e.picks = std::move(idx);
    t.events.push_back(std::move(e));
  }
  return t;
}

/// One catalog line: the event's picks with their stream indices.
inline nlohmann::json catalog_entry(std::size_t event_id, const Cluster& c,
                                    const std::vector<Pick>& picks, const Network& net) {
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i : c.picks) {
    const Pick& p = picks.at(i);
    members.push_back(
        {{"station", net.stations.at(p.station).id}, {"time", p.time}, {"phase", to_string(p.phase)}});
  }
  return {{"event_id", event_id},
          {"n_picks", c.picks.size()},
          {"n_roots", c.roots.size()},
          {"pick_indices", c.picks},
          {"picks", members}};
}

/// JSON-lines catalog. The first line is a header object carrying `meta`.
inline void write_catalog(std::ostream& out, const std::vector<Cluster>& clusters,
                          const std::vector<Pick>& picks, const Network& net,
                          const nlohmann::json& meta = nlohmann::json::object()) {
  out << nlohmann::json{{"header", meta}}.dump() << '\n';
  for (std::size_t k = 0; k < clusters.size(); ++k)
    out << catalog_entry(k, clusters[k], picks, net).dump() << '\n';
}

/// Reads the pick index sets back from a catalog written by write_catalog.
inline std::vector<Cluster> read_catalog(std::istream& in, const std::string& source = "catalog") {
  std::vector<Cluster> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("header")) continue;
      Cluster c;
      c.picks = j.at("pick_indices").get<std::vector<std::size_t>>();
      std::sort(c.picks.begin(), c.picks.end());
      const auto roots = j.value("n_roots", std::size_t{0});
      c.roots.assign(roots, 0);
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline std::vector<Cluster> load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open catalog: " + path);
  return read_catalog(in, path);
}

}  // namespace phaselink
