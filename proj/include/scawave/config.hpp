// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scawave/data_pipeline.hpp"
#include "scawave/model_config.hpp"
#include "scawave/synth.hpp"
#include "scawave/training.hpp"

namespace scawave {

struct EvalConfig {
  std::vector<double> bin_edges{0, 1, 2, 3, 4, 5, 6, 7, 8};
  double scatter_bin_width = 0.1;
  double bias_cell_deg = 1.0;
};

/// Every tunable of the pipeline. Serialized as flat `section.key = value`
/// lines; `#` starts a comment.
struct AppConfig {
  ModelConfig model;
  TrainConfig train;
  data::QcThresholds qc;
  data::BuoyMatchConfig buoy;
  double swh_cap = 8.0;
  data::SplitSpec split = data::SplitSpec::defaults();
  synth::SynthSpec synth;
  EvalConfig eval;

  /// Throws ConfigError naming the key when it is unknown or the value
  /// does not parse.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Applies `key = value` lines. `origin` prefixes error messages.
  void apply_text(std::string_view text, const std::string& origin = "config");

  /// All keys with their current values, one per line in schema order.
  std::string to_text() const;
  /// 16 hex digits of the 64-bit FNV-1a hash of to_text().
  std::string hash() const;

  /// Validates every section. Throws ConfigError.
  void validate() const;
};

struct ConfigKey {
  std::string key;
  std::string help;
};

/// The published schema: every key in serialization order.
const std::vector<ConfigKey>& config_schema();

/// Reads a config file on top of the defaults. Throws IoError or ConfigError.
AppConfig load_config(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace scawave
