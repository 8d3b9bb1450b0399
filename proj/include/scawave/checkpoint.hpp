// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "scawave/config.hpp"
#include "scawave/model.hpp"

namespace scawave {

inline constexpr int kCheckpointVersion = 1;

/// A trained model with everything needed to rebuild and apply it.
struct Checkpoint {
  AppConfig config;
  CheckpointMeta meta;
  data::Standardization stats;
  std::vector<std::pair<std::string, Eigen::VectorXd>> params;  ///< registration order
};

/// JSON document holding the full config, selection metadata, input
/// standardization and every parameter tensor.
void save_checkpoint(const std::string& path, const ScaWaveNet& model, const AppConfig& config,
                     const CheckpointMeta& meta, const data::Standardization& stats);

/// Throws IoError when unreadable and FormatError on a wrong format or version.
Checkpoint read_checkpoint(const std::string& path);

/// Builds the model described by `ckpt.config.model` and loads its weights.
/// Throws FormatError when the stored tensors do not fit the architecture.
ScaWaveNet load_model(const Checkpoint& ckpt);

}  // namespace scawave
