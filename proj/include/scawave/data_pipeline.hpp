// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scawave/model_config.hpp"
#include "scawave/training.hpp"

namespace scawave::data {

using Timestamp = std::int64_t;  ///< UTC seconds since 1970-01-01

/// Number of auxiliary observables carried by a Level-1 record, in column
/// order: ddm_nbrcs, ddm_les, ddm_snr, gps_eirp, sp_rx_gain, sp_inc_angle.
inline constexpr Index kL1Aps = 6;

/// One channel's Level-1 observation. DDMs are stored row-major as
/// [type][doppler][delay] with types brcs, eff_scatter, power_analog.
struct L1Record {
  Timestamp timestamp = 0;
  int channel = 0;  ///< 1..4
  double sp_lat = 0, sp_lon = 0;
  Index ddm_width = 0, ddm_height = 0;
  std::vector<double> ddms;
  std::array<double, kL1Aps> aps{};
  double range_tx_sp = 0, range_sp_rx = 0;  ///< meters
  std::uint32_t quality_flags = 0;
  int tracker_attitude_status = 0;  ///< 0 = OK
  double roll = 0, yaw = 0, pitch = 0;  ///< degrees
  double distance_to_land_km = 0;
  bool solar_contamination = false;
  bool parse_error = false;  ///< set by readers for lines they could not decode

  double sp_rx_gain() const { return aps[4]; }
};

/// Maps longitude into [-180, 180).
double normalize_lon(double lon);

/// gain · 1e27 / (R_ts² · R_sr²). Throws ContractError on a non-positive range.
double compute_rcg(double sp_rx_gain, double range_tx_sp_m, double range_sp_rx_m);

// ---- quality control -------------------------------------------------------

enum class QcRule {
  Malformed,
  NanInf,
  FillValue,
  NegativeObservable,
  LowRcg,
  SolarContamination,
  AttitudeStatus,
  AttitudeAngles,
  NearLand,
  QualityFlags,
};
inline constexpr size_t kQcRuleCount = 10;
std::string_view to_string(QcRule rule);

struct QcThresholds {
  double min_rcg = 3.0;
  double max_abs_roll = 30.0;
  double max_abs_yaw = 5.0;
  double max_abs_pitch = 10.0;
  double min_land_distance_km = 25.0;
  std::uint32_t flag_mask = 0x0FFFFFFFu;  ///< bits 1..28
  Index ddm_width = 11, ddm_height = 17;
};

struct QcTally {
  std::array<Index, kQcRuleCount> rejected{};
  Index kept = 0;

  Index total() const;
  Index operator[](QcRule r) const { return rejected[static_cast<size_t>(r)]; }
};

/// First rule a record violates, or empty when it passes all of them.
std::optional<QcRule> first_violation(const L1Record& record, const QcThresholds& thresholds);

struct QcResult {
  std::vector<L1Record> kept;
  QcTally tally;
};

/// Applies the rules in QcRule order; each rejected record is tallied under
/// the first rule it violates. Kept records have longitude normalized.
QcResult quality_control(std::span<const L1Record> records, const QcThresholds& thresholds = {});

// ---- channel alignment -----------------------------------------------------

using ChannelGroup = std::array<L1Record, 4>;  ///< index c holds channel c+1

struct AlignResult {
  std::vector<ChannelGroup> groups;  ///< ascending timestamp
  Index incomplete = 0;  ///< timestamps missing a channel
  Index duplicate = 0;   ///< timestamps with a repeated channel
};

AlignResult align_channels(std::span<const L1Record> records);

// ---- samples ---------------------------------------------------------------

struct ChannelData {
  double sp_lat = 0, sp_lon = 0;
  std::vector<double> ddms;  ///< 3·W·H
  std::vector<double> aps;   ///< K values in kApColumns order
  double swh_ref = 0;        ///< meters
};

struct FourChannelSample {
  std::string id;
  Timestamp timestamp = 0;
  std::string source;  ///< "era5" or "buoy" (or "synth")
  std::array<ChannelData, 4> channels;
};

/// Builds a channel's AP vector from its L1 record: the six observables,
/// sp_lat, sp_lon, RCG and, when given, wind speed.
std::vector<double> ap_vector(const L1Record& record, std::optional<double> wind);

// ---- ERA5 collocation ------------------------------------------------------

/// Hourly 0.5° reanalysis grid. Values are row-major [time][lat][lon].
struct Era5Grid {
  std::vector<Timestamp> times;
  std::vector<double> lats, lons;  ///< ascending
  std::vector<double> swh;
  std::vector<std::uint8_t> mask;  ///< 1 = land or missing
  std::vector<double> wind;        ///< optional, same layout as swh

  /// Throws FormatError unless axes are strictly increasing with exact
  /// 0.5° / 3600 s spacing and arrays match the axes.
  void validate() const;
  bool has_wind() const { return !wind.empty(); }
  /// Bilinear in space, linear in time. Empty when outside the grid or when
  /// any of the surrounding nodes is masked.
  std::optional<double> interpolate(std::span<const double> field, Timestamp t, double lat, double lon) const;
  std::optional<double> swh_at(Timestamp t, double lat, double lon) const { return interpolate(swh, t, lat, lon); }
};

Era5Grid read_era5_grid(const std::string& path);
void write_era5_grid(const std::string& path, const Era5Grid& grid);

/// Attaches interpolated SWH (and wind when `use_wind`) to every channel.
/// Empty when any channel falls outside the grid or on a masked node.
std::optional<FourChannelSample> match_era5(const ChannelGroup& group, const Era5Grid& grid, bool use_wind);

struct CollocationResult {
  std::vector<FourChannelSample> samples;
  Index dropped = 0;
};

CollocationResult collocate_era5(std::span<const ChannelGroup> groups, const Era5Grid& grid, bool use_wind);

// ---- buoy collocation ------------------------------------------------------

struct BuoyRecord {
  std::string station_id;
  double lat = 0, lon = 0;
  Timestamp timestamp = 0;
  double swh = 0;
};

/// Great-circle distance in km on a sphere of radius 6371 km.
double haversine(double lat1, double lon1, double lat2, double lon2);

struct BuoyMatchConfig {
  double max_distance_km = 25.0;
  Timestamp max_dt_s = 1800;
};

/// Nearest buoy in space within both thresholds (ties: nearest in time).
std::optional<BuoyRecord> nearest_buoy(const L1Record& record, std::span<const BuoyRecord> buoys_by_time,
                                       const BuoyMatchConfig& config = {});

struct BuoyMatchResult {
  std::vector<FourChannelSample> samples;
  Index unmatched_channels = 0;
  Index dropped_groups = 0;
};

/// Matches every channel independently and keeps timestamps where all four
/// channels found a buoy. `buoys` need not be sorted.
BuoyMatchResult match_buoy(std::span<const ChannelGroup> groups, std::span<const BuoyRecord> buoys,
                           const BuoyMatchConfig& config = {});

/// CSV with header station_id,lat,lon,iso_time,swh_m. Rows with a
/// non-finite or negative SWH are skipped and counted in `skipped`.
std::vector<BuoyRecord> read_buoy_csv(const std::string& path, Index* skipped = nullptr);
void write_buoy_csv(const std::string& path, std::span<const BuoyRecord> buoys);

// ---- filtering and splitting -----------------------------------------------

struct CapResult {
  std::vector<FourChannelSample> kept;
  Index dropped = 0;
};

/// Drops samples where any channel's reference SWH exceeds `cap`.
CapResult cap_and_filter(std::vector<FourChannelSample> samples, double cap = 8.0);

/// Half-open UTC interval [start, end).
struct TimeRange {
  Timestamp start = 0, end = 0;
  bool contains(Timestamp t) const { return t >= start && t < end; }
};

struct SplitSpec {
  std::array<TimeRange, 3> ranges;  ///< train, validation, test
  std::array<Index, 3> max_counts{-1, -1, -1};  ///< -1: keep all
  std::uint64_t seed = 0;

  /// Training Aug 2019 - Jul 2020, validation Aug 2020 - Jul 2021, test Aug 2021 - Jul 2022.
  static SplitSpec defaults();
  /// Throws ConfigError on empty or overlapping ranges.
  void validate() const;
};

struct SplitResult {
  std::array<std::vector<FourChannelSample>, 3> parts;
  Index excluded = 0;
};

/// Assigns samples by timestamp and draws a seeded uniform subsample when a
/// split exceeds its max count. Output keeps input order.
SplitResult split_dataset(std::vector<FourChannelSample> samples, const SplitSpec& spec);

/// "YYYY-MM-DDTHH:MM:SS[Z]" or "YYYY-MM-DD" to UTC seconds. Throws FormatError.
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

// ---- canonical sample files --------------------------------------------------

inline constexpr int kSchemaVersion = 1;

/// Per-column statistics used to standardize model inputs.
struct Standardization {
  std::vector<double> ap_mean, ap_sd;             ///< K
  std::array<double, 3> ddm_mean{}, ddm_sd{};     ///< per DDM type

  /// Population mean/SD over all samples and channels. SD 0 is stored as 1.
  static Standardization fit(std::span<const FourChannelSample> samples);
};

struct Manifest {
  int schema_version = kSchemaVersion;
  Index ddm_width = 0, ddm_height = 0, k_ap = 0;
  Index sample_count = 0;
  Standardization stats;
  std::string qc_tallies_json = "{}";  ///< opaque JSON object
  std::string split_json = "{}";       ///< opaque JSON object
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string manifest_path(const std::string& samples_path);

/// Writes `<path>` (one sample per line) and `<path>.manifest.json`.
/// K and statistics are derived from the payload; the geometry set in
/// `manifest` is checked against it.
Manifest write_samples(const std::string& path, std::span<const FourChannelSample> samples, Manifest manifest);

struct SampleFile {
  Manifest manifest;
  std::vector<FourChannelSample> samples;
};

/// Throws IoError when missing, FormatError on version mismatch, truncated
/// or malformed lines, or payload inconsistent with the manifest.
SampleFile read_samples(const std::string& path);

/// L1 interchange: one JSON object per line (field names in the README).
std::vector<L1Record> read_l1_records(const std::string& path);
void write_l1_records(const std::string& path, std::span<const L1Record> records);
std::string to_json_line(const L1Record& record);
/// Never throws on content; undecodable lines come back with parse_error set.
L1Record parse_l1_line(std::string_view line);

/// Standardized model inputs and targets. Throws ConfigError when the AP
/// width or DDM geometry does not match `config`.
Dataset make_dataset(std::span<const FourChannelSample> samples, const Standardization& stats,
                     const ModelConfig& config);

}  // namespace scawave::data
