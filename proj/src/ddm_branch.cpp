// SPDX-License-Identifier: Apache-2.0
#include "scawave/ddm_branch.hpp"

#include <cmath>
#include <string>

#include "scawave/error.hpp"

namespace scawave {

namespace {

constexpr std::array<const char*, kDdmTypes> kDdmTypeNames = {"brcs", "eff_scatter", "power_analog"};

Tensor column(const Tensor& x, Index c) { return ad::slice(x, 1, c, 1); }
Tensor row(const Tensor& x, Index r) { return ad::slice(x, 0, r, 1); }

void check_channels(const Tensor& tokens, const char* op) {
  if (tokens.dim() != 2 || tokens.size(1) != kChannels) {
    throw DimensionError(std::string(op) + ": expected [M×4] tokens, got " +
                         ad::to_string(tokens.shape()));
  }
}

}  // namespace

DdmBranchWeights init_ddm_branch(const ModelConfig& config, ParameterSet& params, ad::Rng& rng) {
  const Index p = config.patch_size;
  const Index de = config.embed_dim;
  DdmBranchWeights w;
  for (Index t = 0; t < kDdmTypes; ++t) {
    const std::string type = kDdmTypeNames[static_cast<size_t>(t)];
    w.embed.kernel[t] = params.add("ddm.embed.kernel." + type,
                                   xavier_uniform({de, 1, p, p}, p * p, de, rng));
    w.embed.bias[t] = params.add("ddm.embed.bias." + type, Tensor({de}));
  }
  w.embed.global_token = params.add("ddm.embed.global_token", normal_init({1, de}, 0.02, rng));

  const bool ci = config.strategy == Strategy::CI;
  for (Index l = 0; l < config.n_layers; ++l) {
    const std::string base = "ddm.layer" + std::to_string(l) + ".";
    EncoderLayerWeights layer;
    layer.attention.w_q = params.add(base + "attn.w_q", xavier_uniform({kChannels}, 1, 1, rng));
    layer.attention.w_k = params.add(base + "attn.w_k", xavier_uniform({kChannels}, 1, 1, rng));
    layer.attention.w_v = params.add(base + "attn.w_v", xavier_uniform({kChannels}, 1, 1, rng));
    layer.attention.w_o =
        ci ? params.add(base + "attn.w_o", xavier_uniform({kChannels}, 1, 1, rng))
           : params.add(base + "attn.w_o", xavier_uniform({kChannels, kChannels}, kChannels, kChannels, rng));
    layer.norm1.gamma = params.add(base + "norm1.gamma", Tensor::full({kChannels}, 1.0));
    layer.norm1.beta = params.add(base + "norm1.beta", Tensor({kChannels}));
    if (ci) {
      const Index h = config.d_ff / kChannels;
      layer.ffn.l1 = params.add(base + "ffn.l1", xavier_uniform({kChannels, h}, 1, h, rng));
      layer.ffn.b1 = params.add(base + "ffn.b1", Tensor({kChannels, h}));
      layer.ffn.l2 = params.add(base + "ffn.l2", xavier_uniform({kChannels, h}, h, 1, rng));
      layer.ffn.b2 = params.add(base + "ffn.b2", Tensor({kChannels}));
    } else {
      const Index h = config.d_ff;
      layer.ffn.l1 = params.add(base + "ffn.l1", xavier_uniform({kChannels, h}, kChannels, h, rng));
      layer.ffn.b1 = params.add(base + "ffn.b1", Tensor({h}));
      layer.ffn.l2 = params.add(base + "ffn.l2", xavier_uniform({h, kChannels}, h, kChannels, rng));
      layer.ffn.b2 = params.add(base + "ffn.b2", Tensor({kChannels}));
    }
    layer.norm2.gamma = params.add(base + "norm2.gamma", Tensor::full({kChannels}, 1.0));
    layer.norm2.beta = params.add(base + "norm2.beta", Tensor({kChannels}));
    w.layers.push_back(std::move(layer));
  }
  return w;
}

Tensor positional_encoding(Index seq_len, Index dim) {
  if (seq_len < 1 || dim < 1) throw DimensionError("positional_encoding: sizes must be positive");
  ad::RowMatrix pe(seq_len, dim);
  for (Index pos = 0; pos < seq_len; ++pos) {
    for (Index j = 0; j < dim; ++j) {
      const double pair = static_cast<double>(j / 2);
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, 2.0 * pair / static_cast<double>(dim));
      pe(pos, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from_matrix(pe);
}

Tensor embed_channel(const Tensor& ddms, const PatchEmbedWeights& weights, Index patch) {
  if (ddms.dim() != 3 || ddms.size(0) != kDdmTypes) {
    throw DimensionError("embed_channel: expected [3×W×H] DDMs, got " + ad::to_string(ddms.shape()));
  }
  std::vector<Tensor> sequence{weights.global_token};
  for (Index t = 0; t < kDdmTypes; ++t) {
    const Tensor type_map = ad::slice(ddms, 0, t, 1);
    const Tensor embedded = ad::conv_patchify(type_map, weights.kernel[t], weights.bias[t], patch);
    sequence.push_back(ad::transpose(embedded));
  }
  const Tensor tokens = ad::concat(sequence, 0);
  return ad::add(tokens, positional_encoding(tokens.size(0), tokens.size(1)));
}

Tensor aggregate_channels(std::span<const Tensor> per_channel) {
  if (per_channel.size() != static_cast<size_t>(kChannels)) {
    throw DimensionError("aggregate_channels: expected 4 channel sequences");
  }
  std::vector<Tensor> flat;
  for (const Tensor& seq : per_channel) {
    if (seq.shape() != per_channel.front().shape()) {
      throw DimensionError("aggregate_channels: ragged channel sequences");
    }
    flat.push_back(ad::flatten(seq));
  }
  return ad::stack(flat, 1);
}

std::array<Tensor, kChannels> attention_maps(const Tensor& tokens, const AttentionWeights& weights) {
  check_channels(tokens, "attention_maps");
  const Tensor q = ad::mul(tokens, weights.w_q);
  const Tensor k = ad::mul(tokens, weights.w_k);
  // d_k = 1, so the 1/sqrt(d_k) scaling is the identity.
  std::array<Tensor, kChannels> maps;
  for (Index i = 0; i < kChannels; ++i) {
    maps[i] = ad::softmax_rows(ad::matmul(column(q, i), ad::transpose(column(k, i))));
  }
  return maps;
}

Tensor sca_attention(const Tensor& tokens, const AttentionWeights& weights, Strategy strategy) {
  check_channels(tokens, "sca_attention");
  const bool dense_out = weights.w_o.dim() == 2;
  if (dense_out != (strategy == Strategy::CD)) {
    throw ConfigError("sca_attention: output projection shape " + ad::to_string(weights.w_o.shape()) +
                      " does not match strategy " + to_string(strategy));
  }
  const auto maps = attention_maps(tokens, weights);
  const Tensor v = ad::mul(tokens, weights.w_v);
  std::vector<Tensor> heads;
  for (Index i = 0; i < kChannels; ++i) heads.push_back(ad::matmul(maps[i], column(v, i)));
  const Tensor h = ad::concat(heads, 1);
  return dense_out ? ad::matmul(h, weights.w_o) : ad::mul(h, weights.w_o);
}

Tensor channel_layer_norm(const Tensor& x, const NormWeights& weights, Strategy strategy, double eps) {
  check_channels(x, "channel_layer_norm");
  if (strategy == Strategy::CD) return ad::layer_norm(x, weights.gamma, weights.beta, eps);
  const Tensor normalized = ad::transpose(ad::normalize_rows(ad::transpose(x), eps));
  return ad::add(ad::mul(normalized, weights.gamma), weights.beta);
}

Tensor add_norm(const Tensor& residual, const Tensor& sublayer_out, const NormWeights& weights,
                const LayerContext& ctx) {
  if (ctx.standard_residual) {
    return channel_layer_norm(ad::add(residual, sublayer_out), weights, ctx.strategy, ctx.ln_eps);
  }
  ad::Rng* rng = ctx.rng;
  ad::Rng unused;
  const Tensor normalized = channel_layer_norm(sublayer_out, weights, ctx.strategy, ctx.ln_eps);
  return ad::add(residual, ad::dropout(normalized, ctx.dropout, ctx.train, rng ? *rng : unused));
}

Tensor ffn(const Tensor& x, const FfnWeights& weights, const LayerContext& ctx) {
  check_channels(x, "ffn");
  ad::Rng unused;
  ad::Rng& rng = ctx.rng ? *ctx.rng : unused;
  if (ctx.strategy == Strategy::CD) {
    if (weights.b1.dim() != 1) throw ConfigError("ffn: CI weights used with CD strategy");
    Tensor h = ad::relu(ad::add(ad::matmul(x, weights.l1), weights.b1));
    h = ad::dropout(h, ctx.dropout, ctx.train, rng);
    return ad::add(ad::matmul(h, weights.l2), weights.b2);
  }
  if (weights.b1.dim() != 2 || weights.l1.size(0) != kChannels) {
    throw ConfigError("ffn: CD weights used with CI strategy");
  }
  // Block-diagonal: channel c only sees column c.
  std::vector<Tensor> outputs;
  for (Index c = 0; c < kChannels; ++c) {
    Tensor h = ad::relu(ad::add(ad::matmul(column(x, c), row(weights.l1, c)), row(weights.b1, c)));
    h = ad::dropout(h, ctx.dropout, ctx.train, rng);
    outputs.push_back(ad::add(ad::matmul(h, ad::transpose(row(weights.l2, c))),
                              ad::slice(weights.b2, 0, c, 1)));
  }
  return ad::concat(outputs, 1);
}

Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& weights, const LayerContext& ctx) {
  const Tensor o = sca_attention(x, weights.attention, ctx.strategy);
  // The first block adds the attention output to its own normalization.
  const Tensor d = add_norm(ctx.standard_residual ? x : o, o, weights.norm1, ctx);
  const Tensor df = ffn(d, weights.ffn, ctx);
  return add_norm(d, df, weights.norm2, ctx);
}

Tensor encoder_forward(const Tensor& stack, const DdmBranchWeights& weights,
                       const ModelConfig& config, bool train, ad::Rng& rng) {
  if (stack.dim() != 4 || stack.size(0) != kChannels || stack.size(1) != kDdmTypes) {
    throw DimensionError("encoder_forward: expected [4×3×W×H] DDM stack, got " +
                         ad::to_string(stack.shape()));
  }
  const Index w = stack.size(2), h = stack.size(3);
  std::vector<Tensor> sequences;
  for (Index c = 0; c < kChannels; ++c) {
    const Tensor ddms = ad::reshape(ad::slice(stack, 0, c, 1), {kDdmTypes, w, h});
    sequences.push_back(embed_channel(ddms, weights.embed, config.patch_size));
  }
  Tensor x = aggregate_channels(sequences);
  const LayerContext ctx{config.strategy, config.dropout, train, config.ln_eps,
                         config.standard_residual, &rng};
  for (const EncoderLayerWeights& layer : weights.layers) x = encoder_layer(x, layer, ctx);
  return x;
}

}  // namespace scawave
