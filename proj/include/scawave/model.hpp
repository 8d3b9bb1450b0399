// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "scawave/ap_branch.hpp"
#include "scawave/ddm_branch.hpp"
#include "scawave/fusion_head.hpp"
#include "scawave/model_config.hpp"
#include "scawave/parameters.hpp"

namespace scawave {

/// One standardized four-channel observation as network input.
struct ModelInput {
  Tensor ddms;  ///< [4×3×W×H]
  Tensor aps;   ///< [4×K]
};

/// The complete network: DDM branch, auxiliary-parameter branch, fusion and
/// MLP head. Owns its parameters; not copyable.
class ScaWaveNet {
 public:
  explicit ScaWaveNet(ModelConfig config);

  ScaWaveNet(const ScaWaveNet&) = delete;
  ScaWaveNet& operator=(const ScaWaveNet&) = delete;
  ScaWaveNet(ScaWaveNet&&) = default;
  ScaWaveNet& operator=(ScaWaveNet&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  const DdmBranchWeights& ddm_weights() const { return ddm_; }
  const ApWeights& ap_weights() const { return ap_; }
  const HeadWeights& head_weights() const { return head_; }

  /// Fused head input for one sample: CI [4×F], CD [1×F].
  Tensor fused_features(const ModelInput& input, bool train, ad::Rng& rng) const;

  /// SWH predictions, [B×4]. Throws ContractError on an empty batch.
  Tensor forward(std::span<const ModelInput> batch, bool train, ad::Rng& rng) const;

  /// Eval-mode forward without graph recording.
  Eigen::MatrixXd predict(std::span<const ModelInput> batch) const;

 private:
  ModelConfig config_;
  ParameterSet params_;
  DdmBranchWeights ddm_;
  ApWeights ap_;
  HeadWeights head_;
};

}  // namespace scawave
