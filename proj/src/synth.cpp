// SPDX-License-Identifier: Apache-2.0
#include "scawave/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scawave/error.hpp"

namespace scawave::synth {

using data::L1Record;
using data::Timestamp;

namespace {

constexpr double kLogMedian = 0.6418538861723947;  // ln 1.9
constexpr double kLogSd = 0.35;

struct Draws {
  std::mt19937_64& rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::uniform_real_distribution<double> unit{0.0, 1.0};

  double z() { return normal(rng); }
  double u(double lo, double hi) { return lo + (hi - lo) * unit(rng); }
};

/// One channel's Level-1 record whose observables encode `signal_swh`.
L1Record make_record(Timestamp t, int channel, double lat, double lon, double signal_swh, const SynthSpec& spec,
                     Draws& d) {
  L1Record r;
  r.timestamp = t;
  r.channel = channel;
  r.sp_lat = lat;
  r.sp_lon = lon;
  r.ddm_width = spec.ddm_width;
  r.ddm_height = spec.ddm_height;
  const double noise = spec.noise_sd;
  auto jitter = [&] { return std::max(0.0, 1.0 + noise * d.z()); };

  const double peak = planted_nbrcs(signal_swh);
  const double sd_doppler = 1.2 + 0.2 * signal_swh;
  const double sd_delay = 1.5 + 0.45 * signal_swh;
  const double c_doppler = 0.5 * static_cast<double>(spec.ddm_width - 1);
  const double c_delay = static_cast<double>(spec.ddm_height - 1) / 3.0;
  const Index pixels = spec.ddm_width * spec.ddm_height;
  r.ddms.resize(static_cast<size_t>(3 * pixels));
  for (Index i = 0; i < spec.ddm_width; ++i) {
    for (Index j = 0; j < spec.ddm_height; ++j) {
      const double di = (static_cast<double>(i) - c_doppler) / sd_doppler;
      const double dj = (static_cast<double>(j) - c_delay) / sd_delay;
      const double shape = std::exp(-0.5 * (di * di + dj * dj));
      const double area = 1.0 + 0.5 * std::exp(-0.5 * di * di) * (j >= c_delay ? 1.0 : 0.3);
      const auto p = static_cast<size_t>(i * spec.ddm_height + j);
      r.ddms[p] = peak * shape * jitter();
      r.ddms[static_cast<size_t>(pixels) + p] = area * jitter();
      r.ddms[static_cast<size_t>(2 * pixels) + p] = (0.02 + peak * shape * 0.1) * jitter();
    }
  }
  r.aps[0] = planted_nbrcs(signal_swh) * jitter();
  r.aps[1] = planted_les(signal_swh) * jitter();
  r.aps[2] = std::max(0.0, 10.0 * std::log10(peak) - 10.0 + noise * d.z());
  r.aps[3] = d.u(600.0, 1400.0);
  r.aps[4] = d.u(2.0, 14.0);
  r.aps[5] = d.u(5.0, 60.0);
  r.range_tx_sp = d.u(2.0e7, 2.1e7);
  r.range_sp_rx = d.u(4.5e5, 6.0e5);
  r.roll = d.u(-10.0, 10.0);
  r.yaw = d.u(-2.0, 2.0);
  r.pitch = d.u(-4.0, 4.0);
  r.distance_to_land_km = d.u(60.0, 2000.0);
  return r;
}

double planted_wind(double swh, double noise_sd, Draws& d) { return std::max(0.0, 3.0 + 2.2 * swh + noise_sd * d.z()); }

/// Channel references: correlation-mixed base plus noise, clipped to range.
std::array<double, 4> channel_swh(const SynthSpec& spec, Draws& d) {
  const double base = draw_base_swh(d.rng);
  std::array<double, 4> out{};
  for (double& v : out) {
    const double own = draw_base_swh(d.rng);
    v = spec.channel_corr * base + (1.0 - spec.channel_corr) * own + spec.noise_sd * d.z();
    v = std::clamp(v, spec.swh_lo, spec.swh_hi);
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_samples < 1) throw ConfigError("synth: n_samples must be positive");
  if (ddm_width < 1 || ddm_height < 1) throw ConfigError("synth: DDM geometry must be positive");
  if (!(noise_sd >= 0.0)) throw ConfigError("synth: noise_sd must be non-negative");
  if (!(swh_lo >= 0.0 && swh_hi <= 8.0 && swh_lo < swh_hi)) throw ConfigError("synth: swh range must satisfy 0 <= lo < hi <= 8");
  if (!(channel_corr >= 0.0 && channel_corr <= 1.0)) throw ConfigError("synth: channel_corr must lie in [0, 1]");
  if (end <= start) throw ConfigError("synth: time range is empty");
}

double draw_base_swh(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return std::exp(kLogMedian + kLogSd * n(rng));
}

double planted_nbrcs(double swh) { return 5.0 + 250.0 * std::exp(-0.45 * swh); }
double planted_les(double swh) { return 60.0 / (1.0 + swh); }
double swh_from_nbrcs(double nbrcs) { return -std::log((nbrcs - 5.0) / 250.0) / 0.45; }

std::vector<data::FourChannelSample> generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Draws d{rng};
  const Timestamp step = std::max<Timestamp>(1, (spec.end - spec.start) / spec.n_samples);
  std::vector<data::FourChannelSample> out;
  out.reserve(static_cast<size_t>(spec.n_samples));
  for (Index i = 0; i < spec.n_samples; ++i) {
    data::FourChannelSample s;
    s.timestamp = spec.start + i * step + static_cast<Timestamp>(d.u(0.0, 0.5) * static_cast<double>(step));
    s.id = "synth-" + std::to_string(i);
    s.source = "synth";
    const std::array<double, 4> swh = channel_swh(spec, d);
    const double lat = d.u(-38.0, 38.0), lon = d.u(-180.0, 180.0);
    for (int c = 0; c < 4; ++c) {
      const auto cc = static_cast<size_t>(c);
      const double signal = spec.planted_signal ? swh[cc] : draw_base_swh(rng);
      const L1Record r = make_record(s.timestamp, c + 1, std::clamp(lat + d.u(-3.0, 3.0), -40.0, 40.0),
                                     data::normalize_lon(lon + d.u(-3.0, 3.0)), signal, spec, d);
      std::optional<double> wind;
      if (spec.use_wind) wind = planted_wind(signal, spec.noise_sd, d);
      s.channels[cc] = data::ChannelData{r.sp_lat, r.sp_lon, r.ddms, data::ap_vector(r, wind), swh[cc]};
    }
    out.push_back(std::move(s));
  }
  return out;
}

RawBundle generate_raw(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Draws d{rng};
  RawBundle raw;
  data::Era5Grid& g = raw.grid;
  for (int h = 0; h <= 24; ++h) g.times.push_back(spec.start + 3600 * h);
  for (int i = 0; i <= 20; ++i) g.lats.push_back(20.0 + 0.5 * i);
  for (int i = 0; i <= 20; ++i) g.lons.push_back(-60.0 + 0.5 * i);
  auto field = [&](Timestamp t, double lat, double lon) {
    const double hour = static_cast<double>(t - spec.start) / 3600.0;
    return 1.6 + 0.9 * std::sin(0.6 * lat) * std::cos(0.45 * lon) + 0.4 * std::sin(2.0 * std::numbers::pi * hour / 24.0);
  };
  for (Timestamp t : g.times) {
    for (double lat : g.lats) {
      for (double lon : g.lons) {
        const bool land = lat >= 24.0 && lat <= 25.0 && lon >= -56.0 && lon <= -55.0;
        g.mask.push_back(land ? 1 : 0);
        g.swh.push_back(land ? std::nan("") : field(t, lat, lon));
        if (spec.use_wind) g.wind.push_back(land ? std::nan("") : 4.0 + 2.0 * field(t, lat, lon));
      }
    }
  }

  const std::array<std::pair<double, double>, 2> stations{{{22.0, -58.0}, {27.5, -52.5}}};
  for (Timestamp t = spec.start; t <= spec.start + 86400; t += 1800) {
    for (size_t s = 0; s < stations.size(); ++s) {
      const auto [lat, lon] = stations[s];
      raw.buoys.push_back({"SYN" + std::to_string(41000 + s), lat, lon, t, field(t, lat, lon)});
    }
  }

  const Timestamp step = std::max<Timestamp>(1, 86000 / spec.n_samples);
  for (Index i = 0; i < spec.n_samples; ++i) {
    const Timestamp t = spec.start + 60 + i * step;
    double lat = d.u(20.5, 29.5), lon = d.u(-59.5, -50.5);
    double spread = 0.3;
    if (i % 3 == 0) {
      std::tie(lat, lon) = stations[static_cast<size_t>(i / 3) % stations.size()];
      spread = 0.05;
    }
    for (int c = 1; c <= 4; ++c) {
      if (i % 17 == 16 && c == 4) continue;  // incomplete timestamp
      const double la = lat + d.u(-spread, spread), lo = lon + d.u(-spread, spread);
      const double swh = std::clamp(field(t, la, lo), spec.swh_lo, spec.swh_hi);
      L1Record r = make_record(t, c, la, lo, spec.planted_signal ? swh : draw_base_swh(rng), spec, d);
      if (i % 10 == 9 && c == 2) {
        switch ((i / 10) % 5) {
          case 0: r.roll = 35.0; break;
          case 1: r.distance_to_land_km = 10.0; break;
          case 2: r.quality_flags = 1u << 3; break;
          case 3: r.aps[4] = 0.01; break;
          default: r.aps[0] = std::nan(""); break;
        }
      }
      raw.records.push_back(std::move(r));
    }
  }
  return raw;
}

}  // namespace scawave::synth
