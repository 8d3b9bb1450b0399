// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "scawave/data_pipeline.hpp"

namespace scawave::synth {

struct SynthSpec {
  Index n_samples = 2000;
  Index ddm_width = 11, ddm_height = 17;
  std::uint64_t seed = 0;
  double noise_sd = 0.05;
  double swh_lo = 0.2, swh_hi = 8.0;
  double channel_corr = 0.9;  ///< 1: all four channels share the base SWH
  bool planted_signal = true;
  bool use_wind = false;
  data::Timestamp start = 1564617600;  ///< 2019-08-01
  data::Timestamp end = 1659312000;    ///< 2022-08-01

  /// Throws ConfigError on an empty range, swh bounds outside [0, 8],
  /// correlation outside [0, 1] or a negative noise level.
  void validate() const;
};

/// Base SWH draw: log-normal with median 1.9 m and log-SD 0.35, which puts
/// roughly 87% of the mass in [1, 3] m.
double draw_base_swh(std::mt19937_64& rng);

/// Planted forward maps. Both are strictly decreasing in SWH.
double planted_nbrcs(double swh);
double planted_les(double swh);
/// Inverse of planted_nbrcs.
double swh_from_nbrcs(double nbrcs);

/// Canonical samples with evenly spread timestamps across [start, end).
std::vector<data::FourChannelSample> generate(const SynthSpec& spec);

/// Raw inputs for the preprocessing commands: Level-1 records (with a few
/// QC violations and missing channels), a regional hourly ERA5 grid covering
/// them and buoy series sampled from the same SWH field.
struct RawBundle {
  std::vector<data::L1Record> records;
  data::Era5Grid grid;
  std::vector<data::BuoyRecord> buoys;
};

/// `spec.n_samples` timestamps inside a 24 h window starting at `spec.start`.
RawBundle generate_raw(const SynthSpec& spec);

}  // namespace scawave::synth
