// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

#include "scawave/model_config.hpp"
#include "scawave/parameters.hpp"
#include "scawave/tensor.hpp"

namespace scawave {

using ad::Tensor;

/// Patch-embedding weights shared by the four channels.
struct PatchEmbedWeights {
  std::array<Tensor, kDdmTypes> kernel;  ///< [D_e × 1 × P × P] per DDM type
  std::array<Tensor, kDdmTypes> bias;    ///< [D_e]
  Tensor global_token;                   ///< [1 × D_e]
};

/// Channels-as-heads attention. Q/K/V projections are one scalar per channel
/// ([4]); the output projection is [4×4] (CD) or diagonal [4] (CI).
struct AttentionWeights {
  Tensor w_q, w_k, w_v;
  Tensor w_o;
};

struct NormWeights {
  Tensor gamma;  ///< [4]
  Tensor beta;   ///< [4]
};

/// CD: l1 [4×d_ff], b1 [d_ff], l2 [d_ff×4], b2 [4].
/// CI: per-channel blocks l1, b1, l2 [4×d_ff/4], b2 [4].
struct FfnWeights {
  Tensor l1, b1, l2, b2;
};

struct EncoderLayerWeights {
  AttentionWeights attention;
  NormWeights norm1;
  FfnWeights ffn;
  NormWeights norm2;
};

struct DdmBranchWeights {
  PatchEmbedWeights embed;
  std::vector<EncoderLayerWeights> layers;
};

/// Per-call settings threaded through the encoder layers.
struct LayerContext {
  Strategy strategy = Strategy::CD;
  double dropout = 0.0;
  bool train = false;
  double ln_eps = 1e-5;
  bool standard_residual = false;
  ad::Rng* rng = nullptr;
};

DdmBranchWeights init_ddm_branch(const ModelConfig& config, ParameterSet& params, ad::Rng& rng);

/// Sinusoidal encoding: PE[pos, 2i] = sin(pos / 10000^(2i/dim)),
/// PE[pos, 2i+1] = cos(pos / 10000^(2i/dim)).
Tensor positional_encoding(Index seq_len, Index dim);

/// One channel's [3×W×H] DDMs -> [(3N+1) × D_e]: patch embeddings of each
/// type, the global token prepended, positional encoding added.
Tensor embed_channel(const Tensor& ddms, const PatchEmbedWeights& weights, Index patch);

/// Flattens each [(3N+1) × D_e] sequence and stacks them as columns: [M × 4].
Tensor aggregate_channels(std::span<const Tensor> per_channel);

/// Per-channel [M×M] attention matrices softmax(Q_i K_iᵀ / sqrt(d_k)).
std::array<Tensor, kChannels> attention_maps(const Tensor& tokens, const AttentionWeights& weights);

/// Spatial attention inside each channel followed by the channel-mixing
/// output projection. [M×4] -> [M×4].
Tensor sca_attention(const Tensor& tokens, const AttentionWeights& weights, Strategy strategy);

/// Layer normalization of an [M×4] token matrix. CD normalizes each token
/// across channels; CI normalizes each channel across tokens so no statistic
/// mixes channels.
Tensor channel_layer_norm(const Tensor& x, const NormWeights& weights, Strategy strategy, double eps);

/// `residual + Dropout(LN(sublayer_out))`, or `LN(residual + sublayer_out)`
/// when ctx.standard_residual is set.
Tensor add_norm(const Tensor& residual, const Tensor& sublayer_out, const NormWeights& weights,
                const LayerContext& ctx);

/// L2(Dropout(ReLU(L1(x)))) per token, before the residual.
Tensor ffn(const Tensor& x, const FfnWeights& weights, const LayerContext& ctx);

Tensor encoder_layer(const Tensor& x, const EncoderLayerWeights& weights, const LayerContext& ctx);

/// Full DDM branch on a [4×3×W×H] stack. Returns D' as [M×4].
Tensor encoder_forward(const Tensor& stack, const DdmBranchWeights& weights,
                       const ModelConfig& config, bool train, ad::Rng& rng);

}  // namespace scawave
