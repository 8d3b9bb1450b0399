// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scawave/tensor.hpp"

namespace scawave {

/// A learnable tensor with a model-unique dotted name.
struct Parameter {
  std::string name;
  ad::Tensor tensor;
};

/// Ordered registry of every learnable tensor of a model.
class ParameterSet {
 public:
  /// Registers `value` as a trainable leaf under `name`. Throws ConfigError
  /// when the name is already taken.
  ad::Tensor add(std::string name, ad::Tensor value);

  const std::vector<Parameter>& items() const { return items_; }
  const Parameter* find(std::string_view name) const;
  const Parameter& at(std::string_view name) const;

  /// Total element count over all parameters.
  ad::Index count() const;
  void zero_grad();

  std::vector<Eigen::VectorXd> snapshot() const;
  void restore(const std::vector<Eigen::VectorXd>& values);

 private:
  std::vector<Parameter> items_;
};

/// Uniform Xavier/Glorot initialization with bound sqrt(6 / (fan_in + fan_out)).
ad::Tensor xavier_uniform(ad::Shape shape, ad::Index fan_in, ad::Index fan_out, ad::Rng& rng);
ad::Tensor normal_init(ad::Shape shape, double stddev, ad::Rng& rng);

}  // namespace scawave
