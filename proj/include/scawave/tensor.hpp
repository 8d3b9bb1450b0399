// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace scawave::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

Index numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Dense row-major tensor of doubles with reverse-mode gradient support.
///
/// A Tensor is a shared handle: copies alias the same storage and graph
/// node. Values are immutable once produced by an op; only leaves (parameters)
/// are mutated in place, by optimizers and finite-difference probes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, Eigen::VectorXd data, bool requires_grad = false);

  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  Index dim() const { return static_cast<Index>(shape().size()); }
  Index size(Index axis) const;
  Index numel() const;
  Index rows() const;  ///< 2D view: 1D tensors are a single row.
  Index cols() const;

  const Eigen::VectorXd& data() const;
  Eigen::VectorXd& data_mut() const;  ///< handle semantics: mutates shared storage
  Eigen::Map<const RowMatrix> matrix() const;
  double item() const;
  double at(Index r, Index c) const { return matrix()(r, c); }

  bool requires_grad() const;
  bool has_grad() const;
  const Eigen::VectorXd& grad() const;
  Eigen::Map<const RowMatrix> grad_matrix() const;
  void zero_grad() const;

  /// Value copy with no graph history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  friend Tensor make_op_result(const char*, Shape, Eigen::VectorXd, std::vector<Tensor>,
                               std::function<void(const Eigen::VectorXd&)>);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<Tensor> inputs;
  std::function<void(const Eigen::VectorXd&)> backward;

  void accumulate(const Eigen::Ref<const Eigen::VectorXd>& g);
};
}  // namespace detail

/// Builds the output of a differentiable op. The graph edge is recorded only
/// when gradient mode is on and some input requires a gradient. Throws
/// NumericError if `value` contains NaN or Inf.
Tensor make_op_result(const char* op, Shape shape, Eigen::VectorXd value,
                      std::vector<Tensor> inputs,
                      std::function<void(const Eigen::VectorXd&)> backward);

/// Adds `g` into the gradient of `t` when `t` takes part in differentiation.
void accumulate_grad(const Tensor& t, const Eigen::Ref<const Eigen::VectorXd>& g);

bool grad_enabled();

/// Disables graph recording for its lifetime (inference paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls
/// until zero_grad(); intermediate gradients are recomputed on every call.
void backward(const Tensor& loss);

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// ---- elementwise (2D broadcasting: equal dims or 1) ------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Inverted dropout. Identity when `train` is false or p == 0.
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);

// ---- normalization --------------------------------------------------------

Tensor softmax_rows(const Tensor& x);
/// (x - mean) / sqrt(var + eps) along each row, population variance.
Tensor normalize_rows(const Tensor& x, double eps);
/// Last-axis layer normalization with affine gamma/beta of length d.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, Index axis);
Tensor slice(const Tensor& x, Index axis, Index start, Index length);
std::vector<Tensor> split(const Tensor& x, Index axis, Index parts);
Tensor stack(std::span<const Tensor> parts, Index axis);

// ---- reductions and losses ------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean Huber loss over all elements, error e = ref - pred.
Tensor huber_mean(const Tensor& pred, const Tensor& ref, double delta);

// ---- convolutions ---------------------------------------------------------

/// Zero-pads T×W×H up to multiples of `patch` and lays the non-overlapping
/// patches out as rows: [N × T·P·P], patch order row-major over (W, H).
Tensor unfold_patches(const Tensor& x, Index patch);

/// Non-overlapping patch projection: x [T×W×H], kernel [D×T×P×P], bias [D]
/// -> [D × N] with N = ceil(W/P)·ceil(H/P).
Tensor conv_patchify(const Tensor& x, const Tensor& kernel, const Tensor& bias, Index patch);

/// Pointwise 1D convolution: a [Cin×L], kernel [Cout×Cin] or [Cout×Cin×1],
/// bias [Cout] -> [Cout×L].
Tensor conv1d_embed(const Tensor& a, const Tensor& kernel, const Tensor& bias);

}  // namespace scawave::ad
