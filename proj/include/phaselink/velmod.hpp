#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "phaselink/error.hpp"

namespace phaselink {

enum class Phase : std::uint8_t { P = 0, S = 1 };

inline const char* to_string(Phase p) noexcept { return p == Phase::P ? "P" : "S"; }

struct Layer {
  double top_depth_km = 0.0;
  double vp = 0.0;  // km/s
  double vs = 0.0;  // km/s

  double velocity(Phase phase) const noexcept { return phase == Phase::P ? vp : vs; }
};

/// Flat 1D velocity model. The deepest layer is a half-space.
class LayeredModel {
 public:
  LayeredModel() = default;

  explicit LayeredModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (const auto problem = check(layers_); !problem.empty()) throw InvariantError(problem);
  }

  /// Empty string when `layers` form a valid model, otherwise the violated invariant.
  static std::string check(const std::vector<Layer>& layers) {
    if (layers.empty()) return "model has no layers";
    if (layers.front().top_depth_km != 0.0) return "first layer must start at depth 0";
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string where = "layer " + std::to_string(i + 1) + ": ";
      if (!std::isfinite(l.top_depth_km) || !std::isfinite(l.vp) || !std::isfinite(l.vs))
        return where + "non-finite value";
      if (i > 0 && !(l.top_depth_km > layers[i - 1].top_depth_km))
        return where + "non-increasing depth";
      if (!(l.vs > 0.0) || !(l.vp > 0.0)) return where + "velocities must be positive";
      if (!(l.vp > l.vs)) return where + "vp must exceed vs";
    }
    return {};
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }

  double top(std::size_t i) const noexcept { return layers_[i].top_depth_km; }
  double bottom(std::size_t i) const noexcept {
    return i + 1 < layers_.size() ? layers_[i + 1].top_depth_km
                                  : std::numeric_limits<double>::infinity();
  }

  /// Index of the layer containing `depth`; a depth on an interface belongs to the lower layer.
  std::size_t layer_at(double depth) const noexcept {
    std::size_t k = 0;
    while (k + 1 < layers_.size() && layers_[k + 1].top_depth_km <= depth) ++k;
    return k;
  }

 private:
  std::vector<Layer> layers_;
};

namespace detail {

// Vertical thickness crossed in each layer by a ray leg from the surface down to `depth`.
inline std::vector<double> thickness_above(const LayeredModel& m, double depth) {
  std::vector<double> d(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size() && m.top(i) < depth; ++i)
    d[i] = std::min(m.bottom(i), depth) - m.top(i);
  return d;
}

// Direct (upgoing) ray from a buried source to a receiver at the surface.
inline double direct_time(const std::vector<double>& thick, const std::vector<double>& vel,
                          std::size_t source_layer, double dist) {
  double vmax = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < thick.size(); ++i) {
    if (thick[i] > 0.0) {
      vmax = std::max(vmax, vel[i]);
      total += thick[i];
    }
  }
  if (total == 0.0) return dist / vel[source_layer];  // surface source: grazing ray

  double t_vertical = 0.0;
  for (std::size_t i = 0; i < thick.size(); ++i) t_vertical += thick[i] / vel[i];
  if (dist == 0.0) return t_vertical;

  // The ray is parameterized by its grazing angle phi in the fastest layer, so
  // cos(takeoff) = sin(phi) stays accurate near horizontal propagation.
  // offset(phi) decreases monotonically from +inf (phi -> 0) to 0 (phi = pi/2).
  struct Leg {
    double offset;
    double time;
    double d_offset;  // d offset / d phi
  };
  auto evaluate = [&](double phi) {
    const double cphi = std::cos(phi);
    const double sphi = std::sin(phi);
    Leg leg{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < thick.size(); ++i) {
      if (thick[i] <= 0.0) continue;
      const double ratio = vel[i] / vmax;
      const double s = cphi * ratio;  // sin(theta_i)
      const double c = vel[i] == vmax ? sphi : std::sqrt((1.0 - s) * (1.0 + s));
      leg.offset += thick[i] * s / c;
      leg.time += thick[i] / (vel[i] * c);
      // d tan(theta_i)/d phi = -ratio * sin(phi) / cos^3(theta_i)
      leg.d_offset -= thick[i] * ratio * sphi / (c * c * c);
    }
    return leg;
  };

  // Safeguarded Newton iteration inside a shrinking bisection bracket.
  double lo = 0.0;                        // offset(lo) = +inf > dist
  double hi = std::numbers::pi / 2.0;     // offset(hi) = 0 < dist
  double phi = std::atan2(total, dist);  // straight-line guess
  Leg leg = evaluate(phi);
  for (int iter = 0; iter < 200; ++iter) {
    const double residual = leg.offset - dist;
    if (std::abs(residual) <= 1e-9) break;
    if (residual > 0.0) lo = phi; else hi = phi;
    double next = phi - residual / leg.d_offset;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == phi || hi - lo <= 4 * std::numeric_limits<double>::epsilon()) break;
    phi = next;
    leg = evaluate(phi);
  }
  return leg.time;
}

}  // namespace detail

/// First-arrival travel time (s) from a source at `source_depth` km to a surface
/// receiver `epi_dist` km away: the minimum of the direct ray and every head wave
/// refracted along an interface at or below the source.
inline double travel_time(const LayeredModel& model, double source_depth, double epi_dist,
                          Phase phase) {
  if (!(source_depth >= 0.0) || !(epi_dist >= 0.0) || !std::isfinite(source_depth) ||
      !std::isfinite(epi_dist))
    throw std::invalid_argument("travel_time: depth and distance must be finite and >= 0");
  if (model.size() == 0) throw std::invalid_argument("travel_time: empty model");

  const std::size_t n = model.size();
  std::vector<double> vel(n);
  for (std::size_t i = 0; i < n; ++i) vel[i] = model.layers()[i].velocity(phase);

  const std::size_t k = model.layer_at(source_depth);
  const auto thick = detail::thickness_above(model, source_depth);
  double best = detail::direct_time(thick, vel, k, epi_dist);

  // Head wave along the top of layer j. Legs: up through every layer above j,
  // and down from the source to the top of j.
  double vmax_above = 0.0;
  for (std::size_t i = 0; i < k; ++i) vmax_above = std::max(vmax_above, vel[i]);
  for (std::size_t j = std::max<std::size_t>(k, 1); j < n; ++j) {
    if (j > k) vmax_above = std::max(vmax_above, vel[j - 1]);
    if (model.top(j) < source_depth) continue;
    if (!(vel[j] > vmax_above)) continue;
    const double slowness = 1.0 / vel[j];
    double intercept = 0.0;
    double critical = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      double path = model.bottom(i) - model.top(i);
      if (i == k) path += model.bottom(i) - source_depth;
      else if (i > k) path *= 2.0;
      if (path <= 0.0) continue;
      const double s = vel[i] * slowness;
      const double c = std::sqrt((1.0 - s) * (1.0 + s));
      intercept += path * c / vel[i];
      critical += path * s / c;
    }
    if (epi_dist >= critical) best = std::min(best, intercept + epi_dist * slowness);
  }
  return best;
}

/// Parses `top_depth_km vp_kms vs_kms` rows; `#` starts a comment.
inline LayeredModel read_model(std::istream& in, const std::string& source = "model") {
  std::vector<Layer> layers;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::string first;
    if (!(row >> first)) continue;
    Layer layer;
    std::istringstream all(line);
    if (!(all >> layer.top_depth_km >> layer.vp >> layer.vs))
      throw ParseError(source, lineno, "expected 'top_depth_km vp vs'");
    std::string extra;
    if (all >> extra) throw ParseError(source, lineno, "unexpected trailing field '" + extra + "'");
    if (!layers.empty() && !(layer.top_depth_km > layers.back().top_depth_km))
      throw ParseError(source, lineno, "non-increasing depth");
    if (!(layer.vp > layer.vs)) throw ParseError(source, lineno, "vp must exceed vs");
    if (!(layer.vs > 0.0)) throw ParseError(source, lineno, "velocities must be positive");
    if (layers.empty() && layer.top_depth_km != 0.0)
      throw ParseError(source, lineno, "first layer must start at depth 0");
    layers.push_back(layer);
  }
  if (layers.empty()) throw ParseError(source, lineno, "model has no layers");
  return LayeredModel(std::move(layers));
}

inline LayeredModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open velocity model: " + path);
  return read_model(in, path);
}

}  // namespace phaselink
