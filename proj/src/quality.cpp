// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <numeric>

#include "scawave/data_pipeline.hpp"
#include "scawave/error.hpp"

namespace scawave::data {

namespace {

bool is_fill(double v) { return v <= -9999.0 || std::abs(v) >= 9.9e36; }

template <typename F>
void for_each_numeric(const L1Record& r, F&& f) {
  f(r.sp_lat);
  f(r.sp_lon);
  for (double v : r.ddms) f(v);
  for (double v : r.aps) f(v);
  f(r.range_tx_sp);
  f(r.range_sp_rx);
  f(r.roll);
  f(r.yaw);
  f(r.pitch);
  f(r.distance_to_land_km);
}

bool usable(double v) { return std::isfinite(v) && !is_fill(v); }

}  // namespace

double normalize_lon(double lon) {
  double x = std::fmod(lon + 180.0, 360.0);
  if (x < 0) x += 360.0;
  return x - 180.0;
}

double compute_rcg(double sp_rx_gain, double range_tx_sp_m, double range_sp_rx_m) {
  if (!(range_tx_sp_m > 0.0) || !(range_sp_rx_m > 0.0)) {
    throw ContractError("compute_rcg: ranges must be positive");
  }
  // Divide step by step; the squared product of two ~1e7 m ranges is ~1e28.
  return sp_rx_gain * 1e27 / (range_tx_sp_m * range_tx_sp_m) / (range_sp_rx_m * range_sp_rx_m);
}

std::string_view to_string(QcRule rule) {
  switch (rule) {
    case QcRule::Malformed: return "malformed";
    case QcRule::NanInf: return "nan_inf";
    case QcRule::FillValue: return "fill_value";
    case QcRule::NegativeObservable: return "negative_observable";
    case QcRule::LowRcg: return "low_rcg";
    case QcRule::SolarContamination: return "solar_contamination";
    case QcRule::AttitudeStatus: return "attitude_status";
    case QcRule::AttitudeAngles: return "attitude_angles";
    case QcRule::NearLand: return "near_land";
    case QcRule::QualityFlags: return "quality_flags";
  }
  return "unknown";
}

Index QcTally::total() const { return std::accumulate(rejected.begin(), rejected.end(), kept); }

std::optional<QcRule> first_violation(const L1Record& r, const QcThresholds& th) {
  const bool geometry_ok = r.ddm_width == th.ddm_width && r.ddm_height == th.ddm_height &&
                           static_cast<Index>(r.ddms.size()) == kDdmTypes * r.ddm_width * r.ddm_height;
  const bool lat_bad = usable(r.sp_lat) && std::abs(r.sp_lat) > 90.0;
  const bool range_bad = (usable(r.range_tx_sp) && r.range_tx_sp <= 0.0) ||
                         (usable(r.range_sp_rx) && r.range_sp_rx <= 0.0);
  if (r.parse_error || r.channel < 1 || r.channel > 4 || !geometry_ok || lat_bad || range_bad) {
    return QcRule::Malformed;
  }
  bool finite = true, filled = false;
  for_each_numeric(r, [&](double v) {
    if (!std::isfinite(v)) finite = false;
    else if (is_fill(v)) filled = true;
  });
  if (!finite) return QcRule::NanInf;
  if (filled) return QcRule::FillValue;
  if (r.aps[0] < 0 || r.aps[1] < 0 || r.aps[2] < 0 || r.sp_rx_gain() < 0) return QcRule::NegativeObservable;
  if (compute_rcg(r.sp_rx_gain(), r.range_tx_sp, r.range_sp_rx) < th.min_rcg) return QcRule::LowRcg;
  if (r.solar_contamination) return QcRule::SolarContamination;
  if (r.tracker_attitude_status != 0) return QcRule::AttitudeStatus;
  if (std::abs(r.roll) > th.max_abs_roll || std::abs(r.yaw) > th.max_abs_yaw || std::abs(r.pitch) > th.max_abs_pitch) {
    return QcRule::AttitudeAngles;
  }
  if (r.distance_to_land_km < th.min_land_distance_km) return QcRule::NearLand;
  if ((r.quality_flags & th.flag_mask) != 0) return QcRule::QualityFlags;
  return std::nullopt;
}

QcResult quality_control(std::span<const L1Record> records, const QcThresholds& thresholds) {
  QcResult out;
  for (const L1Record& r : records) {
    if (const auto rule = first_violation(r, thresholds)) {
      ++out.tally.rejected[static_cast<size_t>(*rule)];
    } else {
      L1Record kept = r;
      kept.sp_lon = normalize_lon(kept.sp_lon);
      out.kept.push_back(std::move(kept));
      ++out.tally.kept;
    }
  }
  return out;
}

AlignResult align_channels(std::span<const L1Record> records) {
  std::map<Timestamp, std::vector<const L1Record*>> by_time;
  for (const L1Record& r : records) by_time[r.timestamp].push_back(&r);
  AlignResult out;
  for (const auto& [t, recs] : by_time) {
    std::array<int, 4> seen{};
    for (const L1Record* r : recs) {
      if (r->channel >= 1 && r->channel <= 4) ++seen[static_cast<size_t>(r->channel - 1)];
    }
    bool duplicate = false, missing = false;
    for (int n : seen) {
      duplicate = duplicate || n > 1;
      missing = missing || n == 0;
    }
    if (duplicate) {
      ++out.duplicate;
    } else if (missing) {
      ++out.incomplete;
    } else {
      ChannelGroup g;
      for (const L1Record* r : recs) g[static_cast<size_t>(r->channel - 1)] = *r;
      out.groups.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<double> ap_vector(const L1Record& r, std::optional<double> wind) {
  std::vector<double> aps(r.aps.begin(), r.aps.end());
  aps.push_back(r.sp_lat);
  aps.push_back(r.sp_lon);
  aps.push_back(compute_rcg(r.sp_rx_gain(), r.range_tx_sp, r.range_sp_rx));
  if (wind) aps.push_back(*wind);
  return aps;
}

}  // namespace scawave::data
