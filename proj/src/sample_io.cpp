// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "scawave/data_pipeline.hpp"
#include "scawave/error.hpp"
#include "scawave/text_io.hpp"

namespace scawave::data {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kApNames[kL1Aps] = {"ddm_nbrcs", "ddm_les", "ddm_snr", "gps_eirp", "sp_rx_gain", "sp_inc_angle"};

/// JSON null stands for a missing (non-finite) value.
double num(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

std::vector<double> num_array(const Json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& v : j) out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Json stats_json(const Standardization& s) {
  return Json{{"ap_mean", s.ap_mean}, {"ap_sd", s.ap_sd}, {"ddm_mean", s.ddm_mean}, {"ddm_sd", s.ddm_sd}};
}

Standardization stats_from_json(const Json& j) {
  Standardization s;
  s.ap_mean = j.at("ap_mean").get<std::vector<double>>();
  s.ap_sd = j.at("ap_sd").get<std::vector<double>>();
  s.ddm_mean = j.at("ddm_mean").get<std::array<double, 3>>();
  s.ddm_sd = j.at("ddm_sd").get<std::array<double, 3>>();
  return s;
}

Json sample_json(const FourChannelSample& s) {
  Json channels = Json::array();
  for (const ChannelData& c : s.channels) {
    channels.push_back(Json{{"sp_lat", c.sp_lat}, {"sp_lon", c.sp_lon}, {"swh_ref", c.swh_ref},
                            {"aps", c.aps}, {"ddms", c.ddms}});
  }
  return Json{{"id", s.id}, {"timestamp", s.timestamp}, {"source", s.source}, {"channels", std::move(channels)}};
}

FourChannelSample sample_from_json(const Json& j) {
  FourChannelSample s;
  s.id = j.at("id").get<std::string>();
  s.timestamp = j.at("timestamp").get<Timestamp>();
  s.source = j.at("source").get<std::string>();
  const Json& channels = j.at("channels");
  if (!channels.is_array() || channels.size() != 4) throw FormatError("sample must have exactly 4 channels");
  for (size_t c = 0; c < 4; ++c) {
    const Json& cj = channels[c];
    ChannelData& d = s.channels[c];
    d.sp_lat = cj.at("sp_lat").get<double>();
    d.sp_lon = cj.at("sp_lon").get<double>();
    d.swh_ref = cj.at("swh_ref").get<double>();
    d.aps = cj.at("aps").get<std::vector<double>>();
    d.ddms = cj.at("ddms").get<std::vector<double>>();
  }
  return s;
}

void check_payload(const FourChannelSample& s, Index ddm_size, Index k_ap, const std::string& where) {
  for (const ChannelData& c : s.channels) {
    if (static_cast<Index>(c.ddms.size()) != ddm_size) {
      throw FormatError(where + ": DDM size " + std::to_string(c.ddms.size()) + ", expected " + std::to_string(ddm_size));
    }
    if (static_cast<Index>(c.aps.size()) != k_ap) {
      throw FormatError(where + ": " + std::to_string(c.aps.size()) + " auxiliary values, expected " + std::to_string(k_ap));
    }
  }
}

}  // namespace

Standardization Standardization::fit(std::span<const FourChannelSample> samples) {
  if (samples.empty()) throw ContractError("Standardization::fit: no samples");
  const size_t k = samples.front().channels[0].aps.size();
  const size_t pixels = samples.front().channels[0].ddms.size() / 3;
  Standardization s;
  s.ap_mean.assign(k, 0.0);
  s.ap_sd.assign(k, 0.0);
  double n_ap = 0.0, n_ddm = 0.0;
  for (const auto& smp : samples) {
    for (const ChannelData& c : smp.channels) {
      if (c.aps.size() != k || c.ddms.size() != 3 * pixels) throw ContractError("Standardization::fit: ragged samples");
      for (size_t i = 0; i < k; ++i) s.ap_mean[i] += c.aps[i];
      for (size_t t = 0; t < 3; ++t) {
        for (size_t p = 0; p < pixels; ++p) s.ddm_mean[t] += c.ddms[t * pixels + p];
      }
      n_ap += 1.0;
      n_ddm += static_cast<double>(pixels);
    }
  }
  for (double& m : s.ap_mean) m /= n_ap;
  for (double& m : s.ddm_mean) m /= n_ddm;
  for (const auto& smp : samples) {
    for (const ChannelData& c : smp.channels) {
      for (size_t i = 0; i < k; ++i) s.ap_sd[i] += (c.aps[i] - s.ap_mean[i]) * (c.aps[i] - s.ap_mean[i]);
      for (size_t t = 0; t < 3; ++t) {
        for (size_t p = 0; p < pixels; ++p) {
          const double d = c.ddms[t * pixels + p] - s.ddm_mean[t];
          s.ddm_sd[t] += d * d;
        }
      }
    }
  }
  for (double& v : s.ap_sd) v = std::sqrt(v / n_ap);
  for (double& v : s.ddm_sd) v = std::sqrt(v / n_ddm);
  for (double& v : s.ap_sd) v = v > 0.0 ? v : 1.0;
  for (double& v : s.ddm_sd) v = v > 0.0 ? v : 1.0;
  return s;
}

std::string manifest_path(const std::string& samples_path) { return samples_path + ".manifest.json"; }

Manifest write_samples(const std::string& path, std::span<const FourChannelSample> samples, Manifest manifest) {
  if (manifest.ddm_width < 1 || manifest.ddm_height < 1) throw ContractError("write_samples: DDM geometry not set");
  manifest.schema_version = kSchemaVersion;
  manifest.sample_count = static_cast<Index>(samples.size());
  if (!samples.empty()) {
    manifest.k_ap = static_cast<Index>(samples.front().channels[0].aps.size());
    for (const auto& s : samples) {
      check_payload(s, kDdmTypes * manifest.ddm_width * manifest.ddm_height, manifest.k_ap, "write_samples");
    }
    manifest.stats = Standardization::fit(samples);
  }
  std::string body;
  for (const auto& s : samples) body += sample_json(s).dump() + "\n";
  Json m{{"schema_version", manifest.schema_version},
         {"ddm_width", manifest.ddm_width},
         {"ddm_height", manifest.ddm_height},
         {"k_ap", manifest.k_ap},
         {"sample_count", manifest.sample_count},
         {"standardization", stats_json(manifest.stats)},
         {"qc_tallies", Json::parse(manifest.qc_tallies_json)},
         {"split", Json::parse(manifest.split_json)},
         {"seed", manifest.seed},
         {"config_hash", manifest.config_hash}};
  io::write_file(path, body);
  io::write_file(manifest_path(path), m.dump(2) + "\n");
  return manifest;
}

SampleFile read_samples(const std::string& path) {
  SampleFile out;
  Manifest& m = out.manifest;
  try {
    const Json j = Json::parse(io::read_file(manifest_path(path)));
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw FormatError("unsupported sample schema version " + std::to_string(m.schema_version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
    m.ddm_width = j.at("ddm_width").get<Index>();
    m.ddm_height = j.at("ddm_height").get<Index>();
    m.k_ap = j.at("k_ap").get<Index>();
    m.sample_count = j.at("sample_count").get<Index>();
    m.stats = stats_from_json(j.at("standardization"));
    m.qc_tallies_json = j.at("qc_tallies").dump();
    m.split_json = j.at("split").dump();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path(path) + ": " + e.what());
  }
  const std::vector<std::string> lines = split_lines(io::read_file(path));
  const Index ddm_size = kDdmTypes * m.ddm_width * m.ddm_height;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    try {
      out.samples.push_back(sample_from_json(Json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    check_payload(out.samples.back(), ddm_size, m.k_ap, where);
  }
  if (static_cast<Index>(out.samples.size()) != m.sample_count) {
    throw FormatError(path + ": manifest lists " + std::to_string(m.sample_count) + " samples, file holds " +
                      std::to_string(out.samples.size()) + " (truncated?)");
  }
  return out;
}

std::string to_json_line(const L1Record& r) {
  Json j{{"timestamp", r.timestamp},
         {"channel", r.channel},
         {"sp_lat", r.sp_lat},
         {"sp_lon", r.sp_lon},
         {"ddm_width", r.ddm_width},
         {"ddm_height", r.ddm_height}};
  for (Index i = 0; i < kL1Aps; ++i) j[kApNames[i]] = r.aps[static_cast<size_t>(i)];
  j["range_tx_sp"] = r.range_tx_sp;
  j["range_sp_rx"] = r.range_sp_rx;
  j["quality_flags"] = r.quality_flags;
  j["tracker_attitude_status"] = r.tracker_attitude_status;
  j["roll"] = r.roll;
  j["yaw"] = r.yaw;
  j["pitch"] = r.pitch;
  j["distance_to_land_km"] = r.distance_to_land_km;
  j["solar_contamination"] = r.solar_contamination;
  j["ddms"] = r.ddms;
  return j.dump();
}

L1Record parse_l1_line(std::string_view line) {
  L1Record r;
  try {
    const Json j = Json::parse(line);
    const Json& t = j.at("timestamp");
    r.timestamp = t.is_string() ? parse_iso8601(t.get<std::string>()) : t.get<Timestamp>();
    r.channel = j.at("channel").get<int>();
    r.sp_lat = num(j, "sp_lat");
    r.sp_lon = num(j, "sp_lon");
    r.ddm_width = j.at("ddm_width").get<Index>();
    r.ddm_height = j.at("ddm_height").get<Index>();
    r.ddms = num_array(j.at("ddms"));
    for (Index i = 0; i < kL1Aps; ++i) r.aps[static_cast<size_t>(i)] = num(j, kApNames[i]);
    r.range_tx_sp = num(j, "range_tx_sp");
    r.range_sp_rx = num(j, "range_sp_rx");
    r.quality_flags = j.at("quality_flags").get<std::uint32_t>();
    r.tracker_attitude_status = j.at("tracker_attitude_status").get<int>();
    r.roll = num(j, "roll");
    r.yaw = num(j, "yaw");
    r.pitch = num(j, "pitch");
    r.distance_to_land_km = num(j, "distance_to_land_km");
    r.solar_contamination = j.at("solar_contamination").get<bool>();
  } catch (const std::exception&) {
    r = L1Record{};
    r.parse_error = true;
  }
  return r;
}

std::vector<L1Record> read_l1_records(const std::string& path) {
  std::vector<L1Record> out;
  for (const std::string& line : split_lines(io::read_file(path))) {
    if (!line.empty()) out.push_back(parse_l1_line(line));
  }
  return out;
}

void write_l1_records(const std::string& path, std::span<const L1Record> records) {
  std::string text;
  for (const L1Record& r : records) text += to_json_line(r) + "\n";
  io::write_file(path, text);
}

Era5Grid read_era5_grid(const std::string& path) {
  Era5Grid g;
  try {
    const Json j = Json::parse(io::read_file(path));
    g.times = j.at("times").get<std::vector<Timestamp>>();
    g.lats = j.at("lats").get<std::vector<double>>();
    g.lons = j.at("lons").get<std::vector<double>>();
    g.swh = num_array(j.at("swh"));
    if (j.contains("mask")) g.mask = j.at("mask").get<std::vector<std::uint8_t>>();
    if (j.contains("wind")) g.wind = num_array(j.at("wind"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  g.validate();
  return g;
}

void write_era5_grid(const std::string& path, const Era5Grid& grid) {
  grid.validate();
  Json j{{"times", grid.times}, {"lats", grid.lats}, {"lons", grid.lons}, {"swh", grid.swh}};
  if (!grid.mask.empty()) j["mask"] = grid.mask;
  if (grid.has_wind()) j["wind"] = grid.wind;
  io::write_file(path, j.dump() + "\n");
}

std::vector<BuoyRecord> read_buoy_csv(const std::string& path, Index* skipped) {
  const std::vector<std::string> lines = split_lines(io::read_file(path));
  if (lines.empty() || lines.front() != "station_id,lat,lon,iso_time,swh_m") {
    throw FormatError(path + ": expected header station_id,lat,lon,iso_time,swh_m");
  }
  std::vector<BuoyRecord> out;
  Index dropped = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(lines[i]);
    std::string cell;
    while (std::getline(row, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw FormatError(path + ":" + std::to_string(i + 1) + ": expected 5 fields");
    BuoyRecord b;
    b.station_id = f[0];
    try {
      b.lat = std::stod(f[1]);
      b.lon = std::stod(f[2]);
      b.swh = std::stod(f[4]);
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(i + 1) + ": bad number");
    }
    b.timestamp = parse_iso8601(f[3]);
    if (!std::isfinite(b.swh) || b.swh < 0.0 || !std::isfinite(b.lat) || !std::isfinite(b.lon)) {
      ++dropped;
      continue;
    }
    out.push_back(std::move(b));
  }
  if (skipped) *skipped = dropped;
  return out;
}

void write_buoy_csv(const std::string& path, std::span<const BuoyRecord> buoys) {
  std::string text = "station_id,lat,lon,iso_time,swh_m\n";
  for (const BuoyRecord& b : buoys) {
    text += b.station_id + "," + io::format_double(b.lat) + "," + io::format_double(b.lon) + "," +
            format_iso8601(b.timestamp) + "," + io::format_double(b.swh) + "\n";
  }
  io::write_file(path, text);
}

Dataset make_dataset(std::span<const FourChannelSample> samples, const Standardization& stats,
                     const ModelConfig& config) {
  const Index k = config.ap_columns();
  const Index pixels = config.ddm_width * config.ddm_height;
  if (static_cast<Index>(stats.ap_mean.size()) != k) {
    throw ConfigError("make_dataset: data carries " + std::to_string(stats.ap_mean.size()) +
                      " auxiliary columns, model expects " + std::to_string(k) +
                      (config.use_wind ? " (wind enabled)" : " (wind disabled)"));
  }
  Dataset d;
  d.targets.resize(static_cast<Index>(samples.size()), kChannels);
  for (size_t i = 0; i < samples.size(); ++i) {
    const FourChannelSample& s = samples[i];
    Eigen::VectorXd ddm(kChannels * kDdmTypes * pixels);
    Eigen::VectorXd aps(kChannels * k);
    for (Index c = 0; c < kChannels; ++c) {
      const ChannelData& ch = s.channels[static_cast<size_t>(c)];
      if (static_cast<Index>(ch.aps.size()) != k) throw ConfigError("make_dataset: auxiliary width mismatch in " + s.id);
      if (static_cast<Index>(ch.ddms.size()) != kDdmTypes * pixels) {
        throw ConfigError("make_dataset: DDM geometry of " + s.id + " does not match the model");
      }
      for (Index t = 0; t < kDdmTypes; ++t) {
        const auto tt = static_cast<size_t>(t);
        for (Index p = 0; p < pixels; ++p) {
          ddm((c * kDdmTypes + t) * pixels + p) =
              (ch.ddms[static_cast<size_t>(t * pixels + p)] - stats.ddm_mean[tt]) / stats.ddm_sd[tt];
        }
      }
      for (Index j = 0; j < k; ++j) {
        const auto jj = static_cast<size_t>(j);
        aps(c * k + j) = (ch.aps[jj] - stats.ap_mean[jj]) / stats.ap_sd[jj];
      }
      d.targets(static_cast<Index>(i), c) = ch.swh_ref;
    }
    d.inputs.push_back(ModelInput{Tensor({kChannels, kDdmTypes, config.ddm_width, config.ddm_height}, std::move(ddm)),
                                  Tensor({kChannels, k}, std::move(aps))});
  }
  return d;
}

}  // namespace scawave::data
