// SPDX-License-Identifier: Apache-2.0
#include "scawave/fusion_head.hpp"

#include <cmath>
#include <string>

#include "scawave/error.hpp"

namespace scawave {

HeadWeights init_head(const ModelConfig& config, ParameterSet& params, ad::Rng& rng) {
  HeadWeights head;
  std::vector<Index> widths = config.head_widths();
  widths.insert(widths.begin(), config.fused_width());
  widths.push_back(config.strategy == Strategy::CI ? 1 : kChannels);
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index in = widths[l], out = widths[l + 1];
    const std::string base = "head.layer" + std::to_string(l) + ".";
    head.weights.push_back(params.add(base + "w", xavier_uniform({in, out}, in, out, rng)));
    head.biases.push_back(params.add(base + "b", Tensor({out})));
  }
  return head;
}

Tensor fuse(const Tensor& d_prime, const Tensor& a_prime, Strategy strategy) {
  if (d_prime.dim() != 2 || d_prime.size(1) != kChannels || a_prime.dim() != 2 ||
      a_prime.size(0) != kChannels) {
    throw DimensionError("fuse: expected D' [R×4] and A' [4×K], got " + ad::to_string(d_prime.shape()) +
                         " and " + ad::to_string(a_prime.shape()));
  }
  const std::vector<Tensor> parts{ad::transpose(d_prime), a_prime};
  const Tensor per_channel = ad::concat(parts, 1);
  if (strategy == Strategy::CI) return per_channel;
  return ad::reshape(per_channel, {1, per_channel.numel()});
}

Tensor head_forward(const Tensor& fused, const HeadWeights& weights) {
  if (weights.weights.empty()) throw ConfigError("head_forward: empty head");
  Tensor x = fused;
  const size_t last = weights.weights.size() - 1;
  for (size_t l = 0; l <= last; ++l) {
    x = ad::add(ad::matmul(x, weights.weights[l]), weights.biases[l]);
    if (l != last) x = ad::relu(x);
  }
  return x;
}

double huber(double y_hat, double y, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  const double e = std::abs(y - y_hat);
  return e <= delta ? 0.5 * e * e : delta * e - 0.5 * delta * delta;
}

Tensor batch_loss(const Tensor& pred, const Tensor& ref, double delta) {
  if (!pred.defined() || !ref.defined()) throw ContractError("batch_loss: empty batch");
  if (pred.dim() != 2 || pred.size(1) != kChannels) {
    throw DimensionError("batch_loss: expected [B×4] predictions, got " + ad::to_string(pred.shape()));
  }
  if (pred.shape() != ref.shape()) throw ContractError("batch_loss: batch sizes differ");
  return ad::huber_mean(pred, ref, delta);
}

}  // namespace scawave
