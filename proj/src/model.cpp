// SPDX-License-Identifier: Apache-2.0
#include "scawave/model.hpp"

#include <vector>

#include "scawave/error.hpp"

namespace scawave {

ScaWaveNet::ScaWaveNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  ad::Rng rng(config_.seed);
  ddm_ = init_ddm_branch(config_, params_, rng);
  ap_ = init_ap_branch(config_, params_, rng);
  head_ = init_head(config_, params_, rng);
}

Tensor ScaWaveNet::fused_features(const ModelInput& input, bool train, ad::Rng& rng) const {
  if (input.ddms.shape() != ad::Shape{kChannels, kDdmTypes, config_.ddm_width, config_.ddm_height}) {
    throw DimensionError("model input DDMs " + ad::to_string(input.ddms.shape()) +
                         " do not match the configured geometry");
  }
  if (input.aps.shape() != ad::Shape{kChannels, config_.ap_columns()}) {
    throw ConfigError("model input auxiliary parameters " + ad::to_string(input.aps.shape()) +
                      " do not match K = " + std::to_string(config_.ap_columns()));
  }
  Tensor d_prime = encoder_forward(input.ddms, ddm_, config_, train, rng);
  if (config_.head_input == HeadInput::GlobalOnly) {
    d_prime = ad::slice(d_prime, 0, 0, config_.embed_dim);
  }
  const Tensor a_prime = ap_forward(input.aps, ap_, config_.strategy);
  return fuse(d_prime, a_prime, config_.strategy);
}

Tensor ScaWaveNet::forward(std::span<const ModelInput> batch, bool train, ad::Rng& rng) const {
  if (batch.empty()) throw ContractError("forward: empty batch");
  std::vector<Tensor> fused;
  fused.reserve(batch.size());
  for (const ModelInput& input : batch) fused.push_back(fused_features(input, train, rng));
  const Tensor out = head_forward(ad::concat(fused, 0), head_);
  return ad::reshape(out, {static_cast<Index>(batch.size()), kChannels});
}

Eigen::MatrixXd ScaWaveNet::predict(std::span<const ModelInput> batch) const {
  if (batch.empty()) return Eigen::MatrixXd(0, kChannels);
  ad::NoGradGuard guard;
  ad::Rng rng(0);
  return forward(batch, false, rng).matrix();
}

}  // namespace scawave
