// SPDX-License-Identifier: Apache-2.0
#include "scawave/model_config.hpp"

#include <algorithm>
#include <cmath>

#include "scawave/error.hpp"

namespace scawave {

std::string to_string(Strategy s) { return s == Strategy::CI ? "CI" : "CD"; }

std::string to_string(HeadInput h) { return h == HeadInput::Full ? "full" : "global_only"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "CI" || text == "ci") return Strategy::CI;
  if (text == "CD" || text == "cd") return Strategy::CD;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected CI or CD)");
}

HeadInput parse_head_input(std::string_view text) {
  if (text == "full") return HeadInput::Full;
  if (text == "global_only") return HeadInput::GlobalOnly;
  throw ConfigError("unknown head_input '" + std::string(text) + "' (expected full or global_only)");
}

Index ModelConfig::patches() const {
  return ((ddm_width + patch_size - 1) / patch_size) * ((ddm_height + patch_size - 1) / patch_size);
}

Index ModelConfig::sequence_length() const { return kDdmTypes * patches() + 1; }

Index ModelConfig::tokens() const { return sequence_length() * embed_dim; }

Index ModelConfig::head_rows() const {
  return head_input == HeadInput::Full ? tokens() : embed_dim;
}

Index ModelConfig::fused_width() const {
  const Index per_channel = head_rows() + ap_columns();
  return strategy == Strategy::CI ? per_channel : kChannels * per_channel;
}

std::vector<Index> ModelConfig::head_widths() const {
  const double in = static_cast<double>(fused_width());
  const double floor_w = static_cast<double>(head_min_width);
  std::vector<Index> widths;
  for (Index i = 0; i < head_hidden_layers; ++i) {
    double w = floor_w;
    if (in > floor_w) {
      const double frac = static_cast<double>(i + 1) / static_cast<double>(head_hidden_layers);
      w = std::max(floor_w, std::round(in * std::pow(floor_w / in, frac)));
    }
    Index wi = static_cast<Index>(w);
    if (head_max_width > 0) wi = std::min(wi, head_max_width);
    widths.push_back(wi);
  }
  return widths;
}

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(ddm_width, "ddm_width");
  positive(ddm_height, "ddm_height");
  positive(patch_size, "patch_size");
  positive(embed_dim, "embed_dim");
  positive(n_layers, "n_layers");
  positive(d_ff, "d_ff");
  positive(head_min_width, "head_min_width");
  positive(ap_up_factor, "ap_up_factor");
  if (head_hidden_layers < 0) throw ConfigError("head_hidden_layers must be non-negative");
  if (head_max_width < 0) throw ConfigError("head_max_width must be non-negative");
  if (patch_size > ddm_width || patch_size > ddm_height) {
    throw ConfigError("patch_size larger than the DDM");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
  if (strategy == Strategy::CI && d_ff % kChannels != 0) {
    throw ConfigError("d_ff must be divisible by 4 in CI mode");
  }
}

}  // namespace scawave
