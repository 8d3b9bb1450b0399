// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "scawave/data_pipeline.hpp"

namespace scawave::testing {

/// A record that passes every QC rule: RCG = 50, attitude and land
/// distance well inside limits, no flags.
inline data::L1Record clean_record(data::Timestamp t, int channel, Index w = 11, Index h = 17) {
  data::L1Record r;
  r.timestamp = t;
  r.channel = channel;
  r.sp_lat = 10.0 + channel;
  r.sp_lon = -40.0 + channel;
  r.ddm_width = w;
  r.ddm_height = h;
  r.ddms.resize(static_cast<size_t>(3 * w * h));
  for (size_t i = 0; i < r.ddms.size(); ++i) r.ddms[i] = 1.0 + std::sin(0.1 * static_cast<double>(i) + channel);
  r.aps = {80.0, 0.5, 6.0, 1000.0, 5.0, 30.0};
  r.range_tx_sp = 2e7;
  r.range_sp_rx = 5e5;
  r.roll = 1.0;
  r.yaw = 0.5;
  r.pitch = 2.0;
  r.distance_to_land_km = 300.0;
  return r;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("scawave_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace scawave::testing
