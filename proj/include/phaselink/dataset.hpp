#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phaselink/error.hpp"
#include "phaselink/geo.hpp"
#include "phaselink/parallel.hpp"
#include "phaselink/synth.hpp"
#include "phaselink/window.hpp"

namespace phaselink {

static_assert(std::endian::native == std::endian::little,
              "dataset and checkpoint files are little-endian");

inline constexpr char kDatasetMagic[4] = {'P', 'L', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline nlohmann::json to_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"max_events", c.max_events},         {"depth_km", to_json(c.depth_km)},
          {"reassign_prob", c.reassign_prob},   {"first_origin_s", to_json(c.first_origin_s)},
          {"inter_event_s", to_json(c.inter_event_s)}, {"max_dist_km", to_json(c.max_dist_km)},
          {"discard_prob", c.discard_prob},     {"pick_error_s", to_json(c.pick_error_s)},
          {"false_pick_max", c.false_pick_max}, {"window_s", c.window_s},
          {"n_p", c.n_p},                       {"seed", c.seed}};
}

inline nlohmann::json to_json(const Region& r) {
  return {{"lat_min", r.lat_min}, {"lat_max", r.lat_max}, {"lon_min", r.lon_min},
          {"lon_max", r.lon_max}};
}

/// Per-record summary stored alongside features and labels.
struct SampleSummary {
  bool empty = true;
  std::uint16_t n_real = 0;
  std::int32_t root_event = kFalsePick;
  std::uint16_t n_events = 0;
  std::uint16_t n_linked = 0;
};

/// In-memory dataset of fixed-size records. See docs/formats.md for the file layout.
struct Dataset {
  std::size_t n_p = 0;
  double window_s = 120.0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;  // records [0, n_train) train, the rest validate
  nlohmann::json header;    // full self-describing header
  std::vector<float> features;        // size() * n_p * kFeatureWidth
  std::vector<std::uint8_t> labels;   // size() * n_p
  std::vector<SampleSummary> summaries;

  std::size_t size() const noexcept { return summaries.size(); }

  std::span<const float> features_of(std::size_t i) const {
    return {features.data() + i * n_p * kFeatureWidth, n_p * kFeatureWidth};
  }
  std::span<const std::uint8_t> labels_of(std::size_t i) const {
    return {labels.data() + i * n_p, n_p};
  }

  std::size_t record_bytes() const noexcept { return 12 + n_p * (kFeatureWidth * 4 + 1); }
};

inline std::size_t train_split(std::size_t n) { return (n * 3) / 4; }

/// Generates `n_samples` independent windows. Record i is drawn from RNG stream
/// (cfg.seed, i), so the result does not depend on `workers`.
inline Dataset generate_dataset(const SynthConfig& cfg, const Network& net,
                                const LayeredModel& model, std::size_t n_samples,
                                unsigned workers = 1) {
  cfg.validate();
  Dataset ds;
  ds.n_p = static_cast<std::size_t>(cfg.n_p);
  ds.window_s = cfg.window_s;
  ds.seed = cfg.seed;
  ds.n_train = train_split(n_samples);
  ds.features.assign(n_samples * ds.n_p * kFeatureWidth, 0.0f);
  ds.labels.assign(n_samples * ds.n_p, 0);
  ds.summaries.assign(n_samples, SampleSummary{});

  parallel_for(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::stream(cfg.seed, i);
      const SynthSample s = generate_subsequence(cfg, net, model, rng);
      const auto rows = featurize(s.picks, net.unit, ds.n_p, cfg.window_s);
      float* f = ds.features.data() + i * ds.n_p * kFeatureWidth;
      for (const auto& r : rows) {
        *f++ = static_cast<float>(r.x);
        *f++ = static_cast<float>(r.y);
        *f++ = static_cast<float>(r.t_norm);
        *f++ = static_cast<float>(r.phase_flag);
        *f++ = static_cast<float>(r.pad_flag);
      }
      std::copy(s.labels.begin(), s.labels.end(), ds.labels.begin() + i * ds.n_p);
      SampleSummary& sum = ds.summaries[i];
      sum.empty = s.empty;
      sum.n_real = static_cast<std::uint16_t>(s.picks.size());
      sum.root_event = s.empty ? kFalsePick : s.picks.front().event_id;
      sum.n_events = static_cast<std::uint16_t>(s.truth.events.size());
      sum.n_linked = static_cast<std::uint16_t>(std::count(s.labels.begin(), s.labels.end(), 1));
    }
  });

  ds.header = {{"format", "phaselink-dataset"},
               {"version", kDatasetVersion},
               {"n_samples", n_samples},
               {"n_train", ds.n_train},
               {"n_p", ds.n_p},
               {"n_features", kFeatureWidth},
               {"window_s", cfg.window_s},
               {"seed", cfg.seed},
               {"record_bytes", ds.record_bytes()},
               {"synth", to_json(cfg)},
               {"region", to_json(net.region)},
               {"n_stations", net.size()}};
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers()) layers.push_back({l.top_depth_km, l.vp, l.vs});
  ds.header["velocity_model"] = layers;
  return ds;
}

namespace detail {

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& source) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw IoError("truncated file: " + source);
  return value;
}

}  // namespace detail

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  const std::string header = ds.header.dump();
  out.write(kDatasetMagic, 4);
  detail::put<std::uint32_t>(out, kDatasetVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const SampleSummary& s = ds.summaries[i];
    detail::put<std::uint8_t>(out, s.empty ? 1 : 0);
    detail::put<std::uint8_t>(out, 0);
    detail::put<std::uint16_t>(out, s.n_real);
    detail::put<std::int32_t>(out, s.root_event);
    detail::put<std::uint16_t>(out, s.n_events);
    detail::put<std::uint16_t>(out, s.n_linked);
    const auto f = ds.features_of(i);
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size_bytes()));
    const auto l = ds.labels_of(i);
    out.write(reinterpret_cast<const char*>(l.data()), static_cast<std::streamsize>(l.size()));
  }
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset: " + path);
  write_dataset(out, ds);
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(std::istream& in, const std::string& source = "dataset") {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw IoError("not a phaselink dataset: " + source);
  if (const auto v = detail::get<std::uint32_t>(in, source); v != kDatasetVersion)
    throw IoError("unsupported dataset version " + std::to_string(v) + ": " + source);
  const auto header_len = detail::get<std::uint32_t>(in, source);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) throw IoError("truncated header: " + source);

  Dataset ds;
  std::size_t n = 0;
  try {
    ds.header = nlohmann::json::parse(header);
    ds.n_p = ds.header.at("n_p").get<std::size_t>();
    ds.window_s = ds.header.at("window_s").get<double>();
    ds.seed = ds.header.at("seed").get<std::uint64_t>();
    ds.n_train = ds.header.at("n_train").get<std::size_t>();
    n = ds.header.at("n_samples").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset header in " + source + ": " + e.what());
  }
  if (ds.n_train > n) throw IoError("split marker beyond sample count: " + source);
  ds.features.resize(n * ds.n_p * kFeatureWidth);
  ds.labels.resize(n * ds.n_p);
  ds.summaries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    SampleSummary& s = ds.summaries[i];
    s.empty = detail::get<std::uint8_t>(in, source) != 0;
    detail::get<std::uint8_t>(in, source);
    s.n_real = detail::get<std::uint16_t>(in, source);
    s.root_event = detail::get<std::int32_t>(in, source);
    s.n_events = detail::get<std::uint16_t>(in, source);
    s.n_linked = detail::get<std::uint16_t>(in, source);
    float* f = ds.features.data() + i * ds.n_p * kFeatureWidth;
    if (!in.read(reinterpret_cast<char*>(f),
                 static_cast<std::streamsize>(ds.n_p * kFeatureWidth * sizeof(float))))
      throw IoError("truncated record " + std::to_string(i) + ": " + source);
    if (!in.read(reinterpret_cast<char*>(ds.labels.data() + i * ds.n_p),
                 static_cast<std::streamsize>(ds.n_p)))
      throw IoError("truncated record " + std::to_string(i) + ": " + source);
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  return read_dataset(in, path);
}

}  // namespace phaselink
