#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "phaselink/error.hpp"

namespace phaselink {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  bool valid() const noexcept {
    return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
           lon >= -180.0 && lon <= 180.0;
  }
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Position in the unit square spanned by a Region.
struct UnitPoint {
  double x = 0.0;  // longitude axis
  double y = 0.0;  // latitude axis
};

class OutOfRegionError : public Error {
 public:
  using Error::Error;
};

/// Lat/lon bounding box used to normalize coordinates. No antimeridian crossing.
struct Region {
  double lat_min = 0.0;
  double lat_max = 1.0;
  double lon_min = 0.0;
  double lon_max = 1.0;

  void validate() const {
    if (!(lat_min < lat_max)) throw InvariantError("region: lat_min must be < lat_max");
    if (!(lon_min < lon_max)) throw InvariantError("region: lon_min must be < lon_max");
    if (!GeoPoint{lat_min, lon_min}.valid() || !GeoPoint{lat_max, lon_max}.valid())
      throw InvariantError("region: corners outside valid lat/lon range");
  }

  bool contains(const GeoPoint& p) const noexcept {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
  }

  GeoPoint center() const noexcept {
    return {0.5 * (lat_min + lat_max), 0.5 * (lon_min + lon_max)};
  }
};

/// Affine map of a point inside `r` onto [0,1]^2. Throws OutOfRegionError otherwise.
inline UnitPoint normalize(const GeoPoint& p, const Region& r) {
  if (!r.contains(p)) {
    std::ostringstream msg;
    msg << "point (" << p.lat << ", " << p.lon << ") outside region";
    throw OutOfRegionError(msg.str());
  }
  return {(p.lon - r.lon_min) / (r.lon_max - r.lon_min),
          (p.lat - r.lat_min) / (r.lat_max - r.lat_min)};
}

inline GeoPoint denormalize(const UnitPoint& u, const Region& r) noexcept {
  return {r.lat_min + u.y * (r.lat_max - r.lat_min), r.lon_min + u.x * (r.lon_max - r.lon_min)};
}

/// Great-circle distance on a sphere of radius 6371 km (haversine).
inline double epicentral_distance_km(const GeoPoint& a, const GeoPoint& b) noexcept {
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s_lat = std::sin(0.5 * dlat);
  const double s_lon = std::sin(0.5 * dlon);
  const double h = s_lat * s_lat + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s_lon * s_lon;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

struct Station {
  std::string id;
  GeoPoint location;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& text, const std::string& source, std::size_t line,
                           const char* what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError(source, line, std::string("bad ") + what + " '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(value))
    throw ParseError(source, line, std::string("bad ") + what + " '" + text + "'");
  return value;
}

}  // namespace detail

/// Station list: CSV with header `id,lat,lon`; extra columns (elevation) are ignored.
inline std::vector<Station> read_stations(std::istream& in, const std::string& source = "stations") {
  std::vector<Station> stations;
  std::string line;
  std::size_t lineno = 0;
  int id_col = -1, lat_col = -1, lon_col = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto fields = detail::split_csv(stripped);
    if (id_col < 0) {
      for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
        if (fields[i] == "id") id_col = i;
        if (fields[i] == "lat") lat_col = i;
        if (fields[i] == "lon") lon_col = i;
      }
      if (id_col < 0 || lat_col < 0 || lon_col < 0)
        throw ParseError(source, lineno, "header must contain id,lat,lon");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({id_col, lat_col, lon_col}));
    if (fields.size() <= need) throw ParseError(source, lineno, "too few columns");
    Station st;
    st.id = fields[id_col];
    st.location.lat = detail::parse_double(fields[lat_col], source, lineno, "latitude");
    st.location.lon = detail::parse_double(fields[lon_col], source, lineno, "longitude");
    if (st.id.empty()) throw ParseError(source, lineno, "empty station id");
    if (!st.location.valid()) throw ParseError(source, lineno, "coordinates out of range");
    stations.push_back(std::move(st));
  }
  if (id_col < 0) throw ParseError(source, lineno, "missing header");
  return stations;
}

inline std::vector<Station> load_stations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open station file: " + path);
  return read_stations(in, path);
}

/// Station coordinates mapped into the unit square of `region`.
inline std::vector<UnitPoint> normalize_stations(const std::vector<Station>& stations,
                                                 const Region& region) {
  std::vector<UnitPoint> out;
  out.reserve(stations.size());
  for (const auto& s : stations) out.push_back(normalize(s.location, region));
  return out;
}

/// Stations together with the region that normalizes their coordinates.
struct Network {
  std::vector<Station> stations;
  Region region;
  std::vector<UnitPoint> unit;  // normalized station positions, same order

  Network() = default;
  Network(std::vector<Station> st, const Region& r) : stations(std::move(st)), region(r) {
    region.validate();
    if (stations.empty()) throw InvariantError("network has no stations");
    unit = normalize_stations(stations, region);
  }

  std::size_t size() const noexcept { return stations.size(); }
};

}  // namespace phaselink
