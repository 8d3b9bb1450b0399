// SPDX-License-Identifier: Apache-2.0
#include "scawave/parameters.hpp"

#include <cmath>

#include "scawave/error.hpp"

namespace scawave {

ad::Tensor ParameterSet::add(std::string name, ad::Tensor value) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  ad::Tensor leaf(value.shape(), value.data(), true);
  items_.push_back({std::move(name), leaf});
  return leaf;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const Parameter& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw ContractError("unknown parameter: " + std::string(name));
  return *p;
}

ad::Index ParameterSet::count() const {
  ad::Index n = 0;
  for (const Parameter& p : items_) n += p.tensor.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : items_) p.tensor.zero_grad();
}

std::vector<Eigen::VectorXd> ParameterSet::snapshot() const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(items_.size());
  for (const Parameter& p : items_) out.push_back(p.tensor.data());
  return out;
}

void ParameterSet::restore(const std::vector<Eigen::VectorXd>& values) {
  if (values.size() != items_.size()) throw ContractError("restore: parameter count mismatch");
  for (size_t i = 0; i < items_.size(); ++i) {
    if (values[i].size() != items_[i].tensor.numel()) {
      throw DimensionError("restore: size mismatch for " + items_[i].name);
    }
    items_[i].tensor.data_mut() = values[i];
  }
}

ad::Tensor xavier_uniform(ad::Shape shape, ad::Index fan_in, ad::Index fan_out, ad::Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::VectorXd v(ad::numel(shape));
  for (ad::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

ad::Tensor normal_init(ad::Shape shape, double stddev, ad::Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::VectorXd v(ad::numel(shape));
  for (ad::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

}  // namespace scawave
