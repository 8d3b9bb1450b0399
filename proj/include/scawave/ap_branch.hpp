// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string_view>
#include <utility>

#include "scawave/model_config.hpp"
#include "scawave/parameters.hpp"
#include "scawave/tensor.hpp"

namespace scawave {

using ad::Tensor;

/// Column order of the auxiliary-parameter matrix. Shared with the data files.
inline constexpr std::array<std::string_view, 10> kApColumns = {
    "ddm_nbrcs", "ddm_les",  "ddm_snr", "gps_eirp", "sp_rx_gain",
    "sp_inc_angle", "sp_lat", "sp_lon", "rcg",     "wind_speed"};

/// Weights of the auxiliary-parameter branch for K auxiliary columns.
///
/// The spatial gate (p1, p2) runs along each channel's K values and is shared
/// by all channels. The embedding and the channel gate (p3, p4) differ by
/// strategy:
///   CD: embed_kernel [8×4], p3_w [4×4u], p3_b [4u], p4_w [4u×4], p4_b [4]
///   CI: embed_kernel [8] (output c and 4+c read input channel c only),
///       p3_w/p3_b/p4_w [4×u] (one 1→u→1 block per channel), p4_b [4]
/// where u is the up-projection factor.
struct ApWeights {
  Tensor embed_kernel, embed_bias;
  Tensor p1_w, p1_b, p2_w, p2_b;
  Tensor p3_w, p3_b, p4_w, p4_b;
};

ApWeights init_ap_branch(const ModelConfig& config, ParameterSet& params, ad::Rng& rng);

/// Pointwise embedding to 8 channels, split into two [4×K] maps.
std::pair<Tensor, Tensor> ap_embed(const Tensor& a, const ApWeights& w, Strategy strategy);

/// sigmoid(down(up(x))) applied to each row of x.
Tensor projection_gate(const Tensor& x, const Tensor& up_w, const Tensor& up_b,
                       const Tensor& down_w, const Tensor& down_b);

Tensor spatial_gate(const Tensor& a1, const ApWeights& w);
Tensor channel_gate(const Tensor& a2, const ApWeights& w, Strategy strategy);

/// A ⊙ W_A1 ⊙ W_A2.
Tensor apply_gates(const Tensor& a, const Tensor& spatial, const Tensor& channel);

/// Whole branch: [4×K] standardized auxiliary parameters -> A'.
Tensor ap_forward(const Tensor& a, const ApWeights& w, Strategy strategy);

}  // namespace scawave
