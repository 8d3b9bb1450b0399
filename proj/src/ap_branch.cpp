// SPDX-License-Identifier: Apache-2.0
#include "scawave/ap_branch.hpp"

#include <vector>

#include "scawave/error.hpp"

namespace scawave {

namespace {

Tensor column(const Tensor& x, Index c) { return ad::slice(x, 1, c, 1); }
Tensor row(const Tensor& x, Index r) { return ad::slice(x, 0, r, 1); }

void check_ap(const Tensor& a, const char* op) {
  if (a.dim() != 2 || a.size(0) != kChannels) {
    throw DimensionError(std::string(op) + ": expected [4×K] auxiliary parameters, got " +
                         ad::to_string(a.shape()));
  }
}

}  // namespace

ApWeights init_ap_branch(const ModelConfig& config, ParameterSet& params, ad::Rng& rng) {
  const Index k = config.ap_columns();
  const Index up = config.ap_up_factor;
  ApWeights w;
  const bool ci = config.strategy == Strategy::CI;
  w.embed_kernel = ci ? params.add("ap.embed.kernel", xavier_uniform({2 * kChannels}, 1, 2, rng))
                      : params.add("ap.embed.kernel",
                                   xavier_uniform({2 * kChannels, kChannels}, kChannels, 2 * kChannels, rng));
  w.embed_bias = params.add("ap.embed.bias", Tensor({2 * kChannels}));
  w.p1_w = params.add("ap.spatial.p1_w", xavier_uniform({k, up * k}, k, up * k, rng));
  w.p1_b = params.add("ap.spatial.p1_b", Tensor({up * k}));
  w.p2_w = params.add("ap.spatial.p2_w", xavier_uniform({up * k, k}, up * k, k, rng));
  w.p2_b = params.add("ap.spatial.p2_b", Tensor({k}));
  if (ci) {
    w.p3_w = params.add("ap.channel.p3_w", xavier_uniform({kChannels, up}, 1, up, rng));
    w.p3_b = params.add("ap.channel.p3_b", Tensor({kChannels, up}));
    w.p4_w = params.add("ap.channel.p4_w", xavier_uniform({kChannels, up}, up, 1, rng));
  } else {
    w.p3_w = params.add("ap.channel.p3_w",
                        xavier_uniform({kChannels, up * kChannels}, kChannels, up * kChannels, rng));
    w.p3_b = params.add("ap.channel.p3_b", Tensor({up * kChannels}));
    w.p4_w = params.add("ap.channel.p4_w",
                        xavier_uniform({up * kChannels, kChannels}, up * kChannels, kChannels, rng));
  }
  w.p4_b = params.add("ap.channel.p4_b", Tensor({kChannels}));
  return w;
}

std::pair<Tensor, Tensor> ap_embed(const Tensor& a, const ApWeights& w, Strategy strategy) {
  check_ap(a, "ap_embed");
  if (strategy == Strategy::CD) {
    if (w.embed_kernel.dim() != 2) throw ConfigError("ap_embed: CI weights used with CD strategy");
    const Tensor e = ad::conv1d_embed(a, w.embed_kernel, w.embed_bias);
    return {ad::slice(e, 0, 0, kChannels), ad::slice(e, 0, kChannels, kChannels)};
  }
  if (w.embed_kernel.dim() != 1) throw ConfigError("ap_embed: CD weights used with CI strategy");
  auto half = [&](Index offset) {
    const Tensor s = ad::reshape(ad::slice(w.embed_kernel, 0, offset, kChannels), {kChannels, 1});
    const Tensor b = ad::reshape(ad::slice(w.embed_bias, 0, offset, kChannels), {kChannels, 1});
    return ad::add(ad::mul(a, s), b);
  };
  return {half(0), half(kChannels)};
}

Tensor projection_gate(const Tensor& x, const Tensor& up_w, const Tensor& up_b,
                       const Tensor& down_w, const Tensor& down_b) {
  const Tensor up = ad::add(ad::matmul(x, up_w), up_b);
  return ad::sigmoid(ad::add(ad::matmul(up, down_w), down_b));
}

Tensor spatial_gate(const Tensor& a1, const ApWeights& w) {
  check_ap(a1, "spatial_gate");
  return projection_gate(a1, w.p1_w, w.p1_b, w.p2_w, w.p2_b);
}

Tensor channel_gate(const Tensor& a2, const ApWeights& w, Strategy strategy) {
  check_ap(a2, "channel_gate");
  const Tensor t = ad::transpose(a2);  // [K×4]
  if (strategy == Strategy::CD) {
    if (w.p3_b.dim() != 1) throw ConfigError("channel_gate: CI weights used with CD strategy");
    return ad::transpose(projection_gate(t, w.p3_w, w.p3_b, w.p4_w, w.p4_b));
  }
  if (w.p3_b.dim() != 2) throw ConfigError("channel_gate: CD weights used with CI strategy");
  std::vector<Tensor> cols;
  for (Index c = 0; c < kChannels; ++c) {
    const Tensor up = ad::add(ad::matmul(column(t, c), row(w.p3_w, c)), row(w.p3_b, c));
    cols.push_back(ad::add(ad::matmul(up, ad::transpose(row(w.p4_w, c))), ad::slice(w.p4_b, 0, c, 1)));
  }
  return ad::transpose(ad::sigmoid(ad::concat(cols, 1)));
}

Tensor apply_gates(const Tensor& a, const Tensor& spatial, const Tensor& channel) {
  if (a.shape() != spatial.shape() || a.shape() != channel.shape()) {
    throw DimensionError("apply_gates: gate shapes must equal the parameter matrix shape");
  }
  return ad::mul(ad::mul(a, spatial), channel);
}

Tensor ap_forward(const Tensor& a, const ApWeights& w, Strategy strategy) {
  const auto [a1, a2] = ap_embed(a, w, strategy);
  return apply_gates(a, spatial_gate(a1, w), channel_gate(a2, w, strategy));
}

}  // namespace scawave
