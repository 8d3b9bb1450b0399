// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "scawave/data_pipeline.hpp"
#include "scawave/error.hpp"

namespace scawave::data {

namespace {

constexpr double kGridStep = 0.5;
constexpr Timestamp kHour = 3600;
constexpr double kAxisTol = 1e-9;

struct Bracket {
  size_t lo = 0, hi = 0;
  double frac = 0.0;
};

/// Locates x on an ascending axis. Empty outside [front, back].
std::optional<Bracket> bracket(const std::vector<double>& axis, double x) {
  if (axis.empty() || !(x >= axis.front()) || !(x <= axis.back())) return std::nullopt;
  if (axis.size() == 1) return Bracket{0, 0, 0.0};
  size_t i = static_cast<size_t>(std::upper_bound(axis.begin(), axis.end(), x) - axis.begin());
  i = std::clamp<size_t>(i, 1, axis.size() - 1) - 1;
  return Bracket{i, i + 1, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

bool is_global(const std::vector<double>& lons) {
  return std::abs(static_cast<double>(lons.size()) * kGridStep - 360.0) < kAxisTol;
}

/// Longitude bracket; wraps across the seam when the axis covers the globe.
std::optional<Bracket> lon_bracket(const std::vector<double>& lons, double lon) {
  if (lons.empty()) return std::nullopt;
  if (is_global(lons)) {
    double x = std::fmod(lon - lons.front(), 360.0);
    if (x < 0) x += 360.0;
    const double pos = x / kGridStep;
    size_t j = static_cast<size_t>(std::floor(pos));
    double frac = pos - static_cast<double>(j);
    if (j >= lons.size()) j = 0, frac = 0.0;
    return Bracket{j, (j + 1) % lons.size(), frac};
  }
  // Regional grids may use either longitude convention.
  for (double candidate : {lon, lon + 360.0, lon - 360.0}) {
    if (auto b = bracket(lons, candidate)) return b;
  }
  return std::nullopt;
}

bool near(double a, double b) { return std::abs(a - b) < kAxisTol; }

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.empty()) throw FormatError(std::string("era5 grid: empty ") + name + " axis");
  for (size_t i = 1; i < axis.size(); ++i) {
    if (!near(axis[i] - axis[i - 1], kGridStep)) {
      throw FormatError(std::string("era5 grid: ") + name + " axis spacing must be exactly 0.5 degrees");
    }
  }
}

ChannelData channel_data(const L1Record& r, double swh, std::optional<double> wind) {
  ChannelData c;
  c.sp_lat = r.sp_lat;
  c.sp_lon = r.sp_lon;
  c.ddms = r.ddms;
  c.aps = ap_vector(r, wind);
  c.swh_ref = swh;
  return c;
}

}  // namespace

void Era5Grid::validate() const {
  if (times.empty()) throw FormatError("era5 grid: empty time axis");
  for (size_t i = 1; i < times.size(); ++i) {
    if (times[i] - times[i - 1] != kHour) throw FormatError("era5 grid: time axis must be hourly");
  }
  check_axis(lats, "lat");
  check_axis(lons, "lon");
  const size_t n = times.size() * lats.size() * lons.size();
  if (swh.size() != n) throw FormatError("era5 grid: swh size does not match axes");
  if (!mask.empty() && mask.size() != n) throw FormatError("era5 grid: mask size does not match axes");
  if (!wind.empty() && wind.size() != n) throw FormatError("era5 grid: wind size does not match axes");
}

std::optional<double> Era5Grid::interpolate(std::span<const double> field, Timestamp t, double lat, double lon) const {
  if (times.empty() || t < times.front() || t > times.back()) return std::nullopt;
  const auto bl = bracket(lats, lat);
  const auto bn = lon_bracket(lons, lon);
  if (!bl || !bn) return std::nullopt;
  size_t k = static_cast<size_t>((t - times.front()) / kHour);
  if (k + 1 >= times.size()) k = times.size() >= 2 ? times.size() - 2 : 0;
  const double ft = times.size() >= 2 ? static_cast<double>(t - times[k]) / static_cast<double>(kHour) : 0.0;
  const size_t k2 = times.size() >= 2 ? k + 1 : k;

  const size_t nlat = lats.size(), nlon = lons.size();
  auto node = [&](size_t ti, size_t i, size_t j) -> std::optional<double> {
    const size_t idx = (ti * nlat + i) * nlon + j;
    if ((!mask.empty() && mask[idx] != 0) || !std::isfinite(field[idx])) return std::nullopt;
    return field[idx];
  };
  auto slice = [&](size_t ti) -> std::optional<double> {
    const auto v00 = node(ti, bl->lo, bn->lo), v01 = node(ti, bl->lo, bn->hi);
    const auto v10 = node(ti, bl->hi, bn->lo), v11 = node(ti, bl->hi, bn->hi);
    if (!v00 || !v01 || !v10 || !v11) return std::nullopt;
    const double a = *v00 + bn->frac * (*v01 - *v00);
    const double b = *v10 + bn->frac * (*v11 - *v10);
    return a + bl->frac * (b - a);
  };
  const auto s0 = slice(k), s1 = slice(k2);
  if (!s0 || !s1) return std::nullopt;
  return *s0 + ft * (*s1 - *s0);
}

std::optional<FourChannelSample> match_era5(const ChannelGroup& group, const Era5Grid& grid, bool use_wind) {
  if (use_wind && !grid.has_wind()) throw ConfigError("match_era5: wind requested but the grid has no wind field");
  FourChannelSample s;
  s.timestamp = group[0].timestamp;
  s.source = "era5";
  s.id = "era5-" + std::to_string(s.timestamp);
  for (size_t c = 0; c < 4; ++c) {
    const L1Record& r = group[c];
    const auto swh = grid.swh_at(r.timestamp, r.sp_lat, r.sp_lon);
    if (!swh) return std::nullopt;
    std::optional<double> wind;
    if (use_wind) {
      wind = grid.interpolate(grid.wind, r.timestamp, r.sp_lat, r.sp_lon);
      if (!wind) return std::nullopt;
    }
    s.channels[c] = channel_data(r, *swh, wind);
  }
  return s;
}

CollocationResult collocate_era5(std::span<const ChannelGroup> groups, const Era5Grid& grid, bool use_wind) {
  CollocationResult out;
  for (const ChannelGroup& g : groups) {
    if (auto s = match_era5(g, grid, use_wind)) {
      out.samples.push_back(std::move(*s));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

double haversine(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * kRad;
  const double dlon = (lon2 - lon1) * kRad;
  const double s = std::sin(dlat / 2);
  const double t = std::sin(dlon / 2);
  const double a = s * s + std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * t * t;
  return 2.0 * 6371.0 * std::asin(std::sqrt(std::clamp(a, 0.0, 1.0)));
}

std::optional<BuoyRecord> nearest_buoy(const L1Record& r, std::span<const BuoyRecord> buoys,
                                       const BuoyMatchConfig& config) {
  auto by_time = [](const BuoyRecord& b, Timestamp t) { return b.timestamp < t; };
  auto first = std::lower_bound(buoys.begin(), buoys.end(), r.timestamp - config.max_dt_s, by_time);
  const BuoyRecord* best = nullptr;
  double best_d = 0.0;
  Timestamp best_dt = 0;
  for (auto it = first; it != buoys.end() && it->timestamp <= r.timestamp + config.max_dt_s; ++it) {
    const double d = haversine(r.sp_lat, r.sp_lon, it->lat, it->lon);
    // Half a micrometer of slack absorbs trigonometric roundoff at the boundary.
    if (d > config.max_distance_km + 5e-10) continue;
    const Timestamp dt = std::abs(it->timestamp - r.timestamp);
    if (!best || d < best_d || (d == best_d && dt < best_dt)) {
      best = &*it;
      best_d = d;
      best_dt = dt;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

BuoyMatchResult match_buoy(std::span<const ChannelGroup> groups, std::span<const BuoyRecord> buoys,
                           const BuoyMatchConfig& config) {
  std::vector<BuoyRecord> sorted(buoys.begin(), buoys.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const BuoyRecord& a, const BuoyRecord& b) { return a.timestamp < b.timestamp; });
  BuoyMatchResult out;
  for (const ChannelGroup& g : groups) {
    FourChannelSample s;
    s.timestamp = g[0].timestamp;
    s.source = "buoy";
    s.id = "buoy-" + std::to_string(s.timestamp);
    bool complete = true;
    for (size_t c = 0; c < 4; ++c) {
      const auto b = nearest_buoy(g[c], sorted, config);
      if (!b) {
        ++out.unmatched_channels;
        complete = false;
        continue;
      }
      s.channels[c] = channel_data(g[c], b->swh, std::nullopt);
    }
    if (complete) {
      out.samples.push_back(std::move(s));
    } else {
      ++out.dropped_groups;
    }
  }
  return out;
}

CapResult cap_and_filter(std::vector<FourChannelSample> samples, double cap) {
  CapResult out;
  for (FourChannelSample& s : samples) {
    const bool over = std::any_of(s.channels.begin(), s.channels.end(),
                                  [cap](const ChannelData& c) { return !(c.swh_ref <= cap); });
    if (over) {
      ++out.dropped;
    } else {
      out.kept.push_back(std::move(s));
    }
  }
  return out;
}

SplitSpec SplitSpec::defaults() {
  SplitSpec s;
  const Timestamp b0 = parse_iso8601("2019-08-01"), b1 = parse_iso8601("2020-08-01");
  const Timestamp b2 = parse_iso8601("2021-08-01"), b3 = parse_iso8601("2022-08-01");
  s.ranges = {TimeRange{b0, b1}, TimeRange{b1, b2}, TimeRange{b2, b3}};
  return s;
}

void SplitSpec::validate() const {
  for (const TimeRange& r : ranges) {
    if (r.end <= r.start) throw ConfigError("split range is empty");
  }
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = i + 1; j < 3; ++j) {
      if (ranges[i].start < ranges[j].end && ranges[j].start < ranges[i].end) {
        throw ConfigError("split ranges overlap");
      }
    }
  }
  for (Index m : max_counts) {
    if (m < -1) throw ConfigError("split max count must be -1 or non-negative");
  }
}

SplitResult split_dataset(std::vector<FourChannelSample> samples, const SplitSpec& spec) {
  spec.validate();
  SplitResult out;
  for (FourChannelSample& s : samples) {
    auto it = std::find_if(spec.ranges.begin(), spec.ranges.end(),
                           [&](const TimeRange& r) { return r.contains(s.timestamp); });
    if (it == spec.ranges.end()) {
      ++out.excluded;
    } else {
      out.parts[static_cast<size_t>(it - spec.ranges.begin())].push_back(std::move(s));
    }
  }
  std::mt19937_64 rng(spec.seed);
  for (size_t p = 0; p < 3; ++p) {
    auto& part = out.parts[p];
    const Index cap = spec.max_counts[p];
    if (cap < 0 || static_cast<size_t>(cap) >= part.size()) continue;
    std::vector<size_t> idx(part.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<size_t>(cap));
    std::sort(idx.begin(), idx.end());
    std::vector<FourChannelSample> chosen;
    chosen.reserve(idx.size());
    for (size_t i : idx) chosen.push_back(std::move(part[i]));
    part = std::move(chosen);
  }
  return out;
}

namespace {

int parse_int(std::string_view text, size_t pos, size_t len, std::string_view whole) {
  int v = 0;
  if (pos + len > text.size()) throw FormatError("bad ISO-8601 time: " + std::string(whole));
  const auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
  if (ec != std::errc() || p != text.data() + pos + len) throw FormatError("bad ISO-8601 time: " + std::string(whole));
  return v;
}

}  // namespace

Timestamp parse_iso8601(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  auto bad = [&] { return FormatError("bad ISO-8601 time: " + std::string(text)); };
  if (s.size() != 10 && s.size() != 16 && s.size() != 19) throw bad();
  if (s[4] != '-' || s[7] != '-') throw bad();
  const int y = parse_int(s, 0, 4, text), mo = parse_int(s, 5, 2, text), d = parse_int(s, 8, 2, text);
  int hh = 0, mm = 0, ss = 0;
  if (s.size() > 10) {
    if ((s[10] != 'T' && s[10] != ' ') || s[13] != ':') throw bad();
    hh = parse_int(s, 11, 2, text);
    mm = parse_int(s, 14, 2, text);
    if (s.size() == 19) {
      if (s[16] != ':') throw bad();
      ss = parse_int(s, 17, 2, text);
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) throw bad();
  return sys_days{ymd}.time_since_epoch().count() * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto days = floor<std::chrono::days>(tp);
  const year_month_day ymd{days};
  const hh_mm_ss hms{tp - days};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

}  // namespace scawave::data
