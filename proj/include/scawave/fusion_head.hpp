// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "scawave/model_config.hpp"
#include "scawave/parameters.hpp"
#include "scawave/tensor.hpp"

namespace scawave {

using ad::Tensor;

/// MLP task head: hidden layers with ReLU, linear output layer last.
struct HeadWeights {
  std::vector<Tensor> weights;  ///< [in×out] per layer
  std::vector<Tensor> biases;   ///< [out]
};

/// CD: one joint network with 4 outputs. CI: one network with a single
/// output, shared by the four channels.
HeadWeights init_head(const ModelConfig& config, ParameterSet& params, ad::Rng& rng);

/// Concatenates encoder and auxiliary features per channel.
/// d_prime [R×4], a_prime [4×K] -> CI: [4 × (R+K)] (row c = channel c),
/// CD: [1 × 4(R+K)] (the four channel vectors back to back).
Tensor fuse(const Tensor& d_prime, const Tensor& a_prime, Strategy strategy);

/// Runs the MLP over each row of `fused`.
Tensor head_forward(const Tensor& fused, const HeadWeights& weights);

/// Huber loss of a single prediction, e = y - y_hat.
double huber(double y_hat, double y, double delta);

/// Mean Huber loss over every (sample, channel) pair. pred, ref: [B×4].
Tensor batch_loss(const Tensor& pred, const Tensor& ref, double delta);

}  // namespace scawave
