// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace scawave {

using Index = Eigen::Index;

inline constexpr Index kChannels = 4;
inline constexpr Index kDdmTypes = 3;

/// How much information may flow between the four receiver channels.
enum class Strategy { CI, CD };

/// Which rows of the encoder output feed the task head.
enum class HeadInput { Full, GlobalOnly };

std::string to_string(Strategy s);
std::string to_string(HeadInput h);
Strategy parse_strategy(std::string_view text);
HeadInput parse_head_input(std::string_view text);

struct ModelConfig {
  Index ddm_width = 11;   ///< W, Doppler bins
  Index ddm_height = 17;  ///< H, delay bins
  Index patch_size = 3;
  Index embed_dim = 8;
  Index n_layers = 6;
  Index d_ff = 2048;
  double dropout = 0.1;
  double ln_eps = 1e-5;
  Strategy strategy = Strategy::CD;
  bool standard_residual = false;
  HeadInput head_input = HeadInput::Full;
  Index head_hidden_layers = 9;
  Index head_min_width = 32;
  Index head_max_width = 0;  ///< 0: no cap
  Index ap_up_factor = 4;
  bool use_wind = false;
  std::uint64_t seed = 0;

  Index ap_columns() const { return use_wind ? 10 : 9; }
  Index patches() const;          ///< N = ceil(W/P)·ceil(H/P)
  Index sequence_length() const;  ///< 3N + 1
  Index tokens() const;           ///< M = (3N + 1)·D_e
  Index head_rows() const;        ///< encoder rows consumed by the head
  Index fused_width() const;      ///< head input width
  std::vector<Index> head_widths() const;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

}  // namespace scawave
