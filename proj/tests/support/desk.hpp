#pragma once

#include <string>

#include "phaselink/geo.hpp"
#include "phaselink/velmod.hpp"

namespace phaselink::testing {

inline const Region kDeskRegion{33.0, 34.0, -117.0, -115.8};

inline std::string data_path(const std::string& name) {
  return std::string(PHASELINK_DATA_DIR) + "/" + name;
}

inline const Network& desk_network() {
  static const Network net(load_stations(data_path("stations.csv")), kDeskRegion);
  return net;
}

inline const LayeredModel& desk_model() {
  static const LayeredModel m = load_model(data_path("socal.vel"));
  return m;
}

}  // namespace phaselink::testing
