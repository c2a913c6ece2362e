#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phaselink/aggregate.hpp"
#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/gridassoc.hpp"
#include "phaselink/linker.hpp"
#include "phaselink/stress.hpp"
#include "phaselink/synth.hpp"

namespace phaselink {

/// Bad configuration or usage. Lists every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join_problems(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunPaths {
  std::string stations;
  std::string velocity_model;
  std::string dataset;
  std::string checkpoint;
  std::string picks;
  std::string catalog;
  std::string truth;
  std::string output_dir = ".";
};

struct RunConfig {
  RunPaths paths;
  Region region{33.0, 34.0, -117.0, -115.8};
  SynthConfig synth;
  std::size_t n_samples = 50000;
  TrainConfig train;
  double threshold = kDefaultThreshold;
  AggParams agg;
  ScanOrder order = ScanOrder::Reverse;
  GridParams grid;
  double grid_spacing_km = 5.0;
  std::vector<double> grid_depths{2.0, 8.0, 14.0, 20.0};
  std::size_t grid_memory_cap = kDefaultGridMemoryCap;
  int stress_events = 500;
  std::vector<double> stress_gaps{kStressGaps.begin(), kStressGaps.end()};
  bool stress_grid = true;
  bool stress_oracle = false;
  std::uint64_t seed = 1;
  unsigned workers = default_workers();

  PipelineOptions pipeline() const {
    PipelineOptions o;
    o.n_p = static_cast<std::size_t>(synth.n_p);
    o.window_s = synth.window_s;
    o.agg = agg;
    o.order = order;
    return o;
  }
};

namespace detail {

inline std::string format_value(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}
inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const Range& r) {
  return format_value(r.lo) + ", " + format_value(r.hi);
}
inline std::string format_value(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : ", ") + format_value(x);
  return out;
}
inline std::string format_value(ScanOrder o) {
  return o == ScanOrder::Reverse ? "reverse" : "forward";
}
template <class T>
  requires std::is_integral_v<T>
std::string format_value(T v) {
  return std::to_string(v);
}

template <class T>
  requires std::is_integral_v<T>
void parse_value(const std::string& s, T& out) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("not an integer");
  out = v;
}
inline double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number");
  }
  if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("not a number");
  return v;
}

inline void parse_value(const std::string& s, double& out) { out = parse_number(s); }
inline void parse_value(const std::string& s, std::string& out) { out = s; }
inline void parse_value(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") out = true;
  else if (s == "false" || s == "0" || s == "no") out = false;
  else throw std::invalid_argument("not a boolean");
}
inline void parse_value(const std::string& s, std::vector<double>& out) {
  std::vector<double> v;
  for (const auto& part : split_csv(s)) v.push_back(parse_number(part));
  out = std::move(v);
}
inline void parse_value(const std::string& s, Range& out) {
  std::vector<double> v;
  parse_value(s, v);
  if (v.size() != 2) throw std::invalid_argument("expected two values 'lo, hi'");
  out = {v[0], v[1]};
}
inline void parse_value(const std::string& s, ScanOrder& out) {
  if (s == "reverse") out = ScanOrder::Reverse;
  else if (s == "forward") out = ScanOrder::Forward;
  else throw std::invalid_argument("expected 'reverse' or 'forward'");
}

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
  bool is_path = false;
};

template <class T>
Field field(std::string key, T& ref, bool is_path = false) {
  return {std::move(key), [&ref] { return format_value(ref); },
          [&ref](const std::string& s) { parse_value(s, ref); }, is_path};
}

inline std::vector<Field> fields(RunConfig& c) {
  return {
      field("paths.stations", c.paths.stations, true),
      field("paths.velocity_model", c.paths.velocity_model, true),
      field("paths.dataset", c.paths.dataset, true),
      field("paths.checkpoint", c.paths.checkpoint, true),
      field("paths.picks", c.paths.picks, true),
      field("paths.catalog", c.paths.catalog, true),
      field("paths.truth", c.paths.truth, true),
      field("paths.output_dir", c.paths.output_dir, true),
      field("region.lat_min", c.region.lat_min),
      field("region.lat_max", c.region.lat_max),
      field("region.lon_min", c.region.lon_min),
      field("region.lon_max", c.region.lon_max),
      field("synth.max_events", c.synth.max_events),
      field("synth.depth_km", c.synth.depth_km),
      field("synth.reassign_prob", c.synth.reassign_prob),
      field("synth.first_origin_s", c.synth.first_origin_s),
      field("synth.inter_event_s", c.synth.inter_event_s),
      field("synth.max_dist_km", c.synth.max_dist_km),
      field("synth.discard_prob", c.synth.discard_prob),
      field("synth.pick_error_s", c.synth.pick_error_s),
      field("synth.false_pick_max", c.synth.false_pick_max),
      field("synth.window_s", c.synth.window_s),
      field("synth.n_p", c.synth.n_p),
      field("synth.n_samples", c.n_samples),
      field("train.batch_size", c.train.batch_size),
      field("train.learning_rate", c.train.learning_rate),
      field("train.beta1", c.train.beta1),
      field("train.beta2", c.train.beta2),
      field("train.adam_epsilon", c.train.adam_epsilon),
      field("train.epochs", c.train.epochs),
      field("train.hidden", c.train.hidden),
      field("train.clip_norm", c.train.clip_norm),
      field("train.checkpoint_every", c.train.checkpoint_every),
      field("link.threshold", c.threshold),
      field("aggregate.n_nuc", c.agg.n_nuc),
      field("aggregate.n_merge", c.agg.n_merge),
      field("aggregate.n_min", c.agg.n_min),
      field("aggregate.order", c.order),
      field("grid.residual_tol", c.grid.residual_tol),
      field("grid.min_picks", c.grid.min_picks),
      field("grid.origin_time_step", c.grid.origin_time_step),
      field("grid.dedup_window", c.grid.dedup_window),
      field("grid.max_distance_km", c.grid.max_distance_km),
      field("grid.spacing_km", c.grid_spacing_km),
      field("grid.depths_km", c.grid_depths),
      field("grid.memory_cap_bytes", c.grid_memory_cap),
      field("stress.n_events", c.stress_events),
      field("stress.max_gaps_s", c.stress_gaps),
      field("stress.run_grid", c.stress_grid),
      field("stress.oracle", c.stress_oracle),
      field("seed", c.seed),
      field("workers", c.workers),
  };
}

}  // namespace detail

/// Applies one `key = value` assignment; relative paths are resolved against `base_dir`.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value,
                             const std::string& base_dir = {}) {
  for (auto& f : detail::fields(cfg)) {
    if (f.key != key) continue;
    std::string v = value;
    if (f.is_path && !v.empty() && !base_dir.empty() && std::filesystem::path(v).is_relative())
      v = (std::filesystem::path(base_dir) / v).lexically_normal().string();
    try {
      f.set(v);
    } catch (const std::exception& e) {
      throw std::invalid_argument("bad value '" + value + "' for " + key + ": " + e.what());
    }
    return;
  }
  throw std::invalid_argument("unknown key '" + key + "'");
}

/// Reads `key = value` lines (`#` starts a comment) into `cfg`. Collects every
/// problem and throws ConfigError listing them all.
inline void read_config(std::istream& in, RunConfig& cfg, const std::string& source = "config",
                        const std::string& base_dir = {}) {
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    try {
      set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)),
                       base_dir);
    } catch (const std::invalid_argument& e) {
      problems.push_back(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
}

inline void load_config(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path});
  read_config(in, cfg, path, std::filesystem::path(path).parent_path().string());
}

/// Applies `key=value` overrides, collecting every problem.
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + o + "' is not key=value");
      continue;
    }
    try {
      set_config_value(cfg, detail::trim(o.substr(0, eq)), detail::trim(o.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      problems.emplace_back(e.what());
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
}

/// Every key with its current value, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& f : detail::fields(const_cast<RunConfig&>(cfg))) out.emplace_back(f.key, f.get());
  return out;
}

inline std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
  return j;
}

/// Which inputs a command needs; files are checked for existence.
struct Requirements {
  bool stations = false;
  bool velocity_model = false;
  bool dataset = false;
  bool checkpoint = false;
  bool picks = false;
  bool catalog = false;
  bool truth = false;
};

/// Every invariant violation and missing input, one message each.
inline std::vector<std::string> config_problems(const RunConfig& cfg, const Requirements& req) {
  std::vector<std::string> out;
  auto prefix = [&](const std::string& p, std::vector<std::string> list) {
    for (auto& s : list) out.push_back(p + s);
  };
  auto need = [&](bool required, const std::string& path, const char* key) {
    if (!required) return;
    if (path.empty()) out.push_back(std::string(key) + " is not set");
    else if (!std::filesystem::exists(path))
      out.push_back(std::string(key) + ": file not found: " + path);
  };
  need(req.stations, cfg.paths.stations, "paths.stations");
  need(req.velocity_model, cfg.paths.velocity_model, "paths.velocity_model");
  need(req.dataset, cfg.paths.dataset, "paths.dataset");
  need(req.checkpoint, cfg.paths.checkpoint, "paths.checkpoint");
  need(req.picks, cfg.paths.picks, "paths.picks");
  need(req.catalog, cfg.paths.catalog, "paths.catalog");
  need(req.truth, cfg.paths.truth, "paths.truth");
  if (!(cfg.region.lat_min < cfg.region.lat_max && cfg.region.lon_min < cfg.region.lon_max))
    out.emplace_back("region: min must be below max");
  prefix("synth: ", cfg.synth.problems());
  prefix("train: ", cfg.train.problems());
  prefix("aggregate: ", cfg.agg.problems());
  prefix("grid: ", cfg.grid.problems());
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
    out.emplace_back("link.threshold must be in [0,1]");
  if (!(cfg.grid_spacing_km > 0.0)) out.emplace_back("grid.spacing_km must be > 0");
  if (cfg.grid_depths.empty()) out.emplace_back("grid.depths_km must not be empty");
  if (cfg.stress_events < 1) out.emplace_back("stress.n_events must be >= 1");
  for (double g : cfg.stress_gaps)
    if (!(g > 0.0)) out.emplace_back("stress.max_gaps_s must all be > 0");
  if (cfg.workers < 1) out.emplace_back("workers must be >= 1");
  return out;
}

inline void validate_config(const RunConfig& cfg, const Requirements& req) {
  if (auto p = config_problems(cfg, req); !p.empty()) throw ConfigError(std::move(p));
}

}  // namespace phaselink
