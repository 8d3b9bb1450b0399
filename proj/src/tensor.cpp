// SPDX-License-Identifier: Apache-2.0
#include "scawave/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "scawave/error.hpp"

namespace scawave::ad {

namespace {

thread_local bool g_grad_enabled = true;

using VecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<const RowMatrix>;

struct Dims2 {
  Index rows;
  Index cols;
};

Dims2 as2d(const Shape& s, const char* op) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw DimensionError(std::string(op) + ": expected a 1D or 2D tensor, got " + to_string(s));
}

MatMap view2d(const Eigen::VectorXd& v, Dims2 d) { return MatMap(v.data(), d.rows, d.cols); }

Eigen::VectorXd flat(const RowMatrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

Index normalize_axis(Index axis, Index rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError(std::string(op) + ": axis out of range");
  }
  return axis;
}

// Views a tensor of any rank as [outer, axis, inner] around `axis`.
struct AxisSplit {
  Index outer;
  Index extent;
  Index inner;
};

AxisSplit axis_split(const Shape& s, Index axis) {
  AxisSplit a{1, s[axis], 1};
  for (Index i = 0; i < axis; ++i) a.outer *= s[i];
  for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) a.inner *= s[i];
  return a;
}

// Sum-reduces a gradient of the broadcast shape back onto an operand shape.
Eigen::VectorXd reduce_to(const RowMatrix& g, Dims2 target) {
  if (g.rows() == target.rows && g.cols() == target.cols) return flat(g);
  RowMatrix r;
  if (target.rows == 1 && target.cols == 1) {
    r = RowMatrix::Constant(1, 1, g.sum());
  } else if (target.rows == 1) {
    r = g.colwise().sum();
  } else {
    r = g.rowwise().sum();
  }
  return flat(r);
}

RowMatrix expand(const Eigen::VectorXd& v, Dims2 d, Dims2 out) {
  return view2d(v, d).replicate(out.rows / d.rows, out.cols / d.cols);
}

enum class BinaryKind { Add, Sub, Mul };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) {
    Eigen::VectorXd out;
    switch (kind) {
      case BinaryKind::Add: out = a.data() + b.data(); break;
      case BinaryKind::Sub: out = a.data() - b.data(); break;
      case BinaryKind::Mul: out = a.data().cwiseProduct(b.data()); break;
    }
    return make_op_result(op, a.shape(), std::move(out), {a, b},
                          [a, b, kind](const Eigen::VectorXd& g) {
                            switch (kind) {
                              case BinaryKind::Add:
                                accumulate_grad(a, g);
                                accumulate_grad(b, g);
                                break;
                              case BinaryKind::Sub:
                                accumulate_grad(a, g);
                                accumulate_grad(b, -g);
                                break;
                              case BinaryKind::Mul:
                                accumulate_grad(a, g.cwiseProduct(b.data()));
                                accumulate_grad(b, g.cwiseProduct(a.data()));
                                break;
                            }
                          });
  }
  const Dims2 da = as2d(a.shape(), op);
  const Dims2 db = as2d(b.shape(), op);
  auto merge = [&](Index x, Index y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a.shape()) +
                         " with " + to_string(b.shape()));
  };
  const Dims2 dout{merge(da.rows, db.rows), merge(da.cols, db.cols)};
  const RowMatrix ea = expand(a.data(), da, dout);
  const RowMatrix eb = expand(b.data(), db, dout);
  RowMatrix out;
  switch (kind) {
    case BinaryKind::Add: out = ea + eb; break;
    case BinaryKind::Sub: out = ea - eb; break;
    case BinaryKind::Mul: out = ea.cwiseProduct(eb); break;
  }
  Shape out_shape = a.shape().size() >= b.shape().size() ? a.shape() : b.shape();
  if (numel(out_shape) != out.size()) out_shape = {dout.rows, dout.cols};
  return make_op_result(op, out_shape, flat(out), {a, b},
                        [a, b, da, db, dout, kind](const Eigen::VectorXd& g) {
                          const MatMap gm(g.data(), dout.rows, dout.cols);
                          switch (kind) {
                            case BinaryKind::Add:
                              accumulate_grad(a, reduce_to(gm, da));
                              accumulate_grad(b, reduce_to(gm, db));
                              break;
                            case BinaryKind::Sub:
                              accumulate_grad(a, reduce_to(gm, da));
                              accumulate_grad(b, -reduce_to(gm, db));
                              break;
                            case BinaryKind::Mul:
                              if (a.requires_grad()) {
                                accumulate_grad(
                                    a, reduce_to(gm.cwiseProduct(expand(b.data(), db, dout)), da));
                              }
                              if (b.requires_grad()) {
                                accumulate_grad(
                                    b, reduce_to(gm.cwiseProduct(expand(a.data(), da, dout)), db));
                              }
                              break;
                          }
                        });
}

}  // namespace

Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Node / Tensor ---------------------------------------------------------

void detail::Node::accumulate(const Eigen::Ref<const Eigen::VectorXd>& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, Eigen::VectorXd::Zero(ad::numel(shape)), requires_grad) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive: " + to_string(shape));
  }
  if (ad::numel(shape) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         to_string(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad) {
  return Tensor({m.rows(), m.cols()}, flat(m), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const Index n = ad::numel(shape);
  return Tensor(std::move(shape), Eigen::VectorXd::Constant(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, Eigen::VectorXd::Constant(1, value), requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

Index Tensor::size(Index axis) const {
  return shape()[normalize_axis(axis, dim(), "size")];
}

Index Tensor::numel() const { return node_ ? node_->value.size() : 0; }

Index Tensor::rows() const { return as2d(shape(), "rows").rows; }
Index Tensor::cols() const { return as2d(shape(), "cols").cols; }

const Eigen::VectorXd& Tensor::data() const {
  require_defined(*this, "data");
  return node_->value;
}

Eigen::VectorXd& Tensor::data_mut() const {
  require_defined(*this, "data_mut");
  return node_->value;
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  const Dims2 d = as2d(shape(), "matrix");
  return view2d(node_->value, d);
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

const Eigen::VectorXd& Tensor::grad() const {
  if (!has_grad()) throw ContractError("gradient not materialized");
  return node_->grad;
}

Eigen::Map<const RowMatrix> Tensor::grad_matrix() const {
  const Dims2 d = as2d(shape(), "grad_matrix");
  return view2d(grad(), d);
}

void Tensor::zero_grad() const {
  if (node_) node_->grad.resize(0);
}

Tensor Tensor::detach() const { return Tensor(shape(), data(), false); }

// ---- graph ----------------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_op_result(const char* op, Shape shape, Eigen::VectorXd value,
                      std::vector<Tensor> inputs,
                      std::function<void(const Eigen::VectorXd&)> backward) {
  if (!value.allFinite()) {
    throw NumericError(std::string(op) + ": non-finite value in forward output");
  }
  Tensor out(std::move(shape), std::move(value), false);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->inputs = std::move(inputs);
  out.node_->backward = std::move(backward);
  return out;
}

void accumulate_grad(const Tensor& t, const Eigen::Ref<const Eigen::VectorXd>& g) {
  if (t.requires_grad()) t.node()->accumulate(g);
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss is not connected to any parameter");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].node();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (detail::Node* n : order) {
    if (n->backward) n->grad.resize(0);
  }
  loss.node()->accumulate(Eigen::VectorXd::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(n->grad);
  }
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0)) {
    throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const RowMatrix c = a.matrix() * b.matrix();
  return make_op_result("matmul", {c.rows(), c.cols()}, flat(c), {a, b},
                        [a, b](const Eigen::VectorXd& g) {
                          const MatMap gm(g.data(), a.size(0), b.size(1));
                          if (a.requires_grad()) {
                            const RowMatrix ga = gm * b.matrix().transpose();
                            accumulate_grad(a, flat(ga));
                          }
                          if (b.requires_grad()) {
                            const RowMatrix gb = a.matrix().transpose() * gm;
                            accumulate_grad(b, flat(gb));
                          }
                        });
}

Tensor transpose(const Tensor& x) {
  require_defined(x, "transpose");
  const Dims2 d = as2d(x.shape(), "transpose");
  const RowMatrix t = view2d(x.data(), d).transpose();
  return make_op_result("transpose", {d.cols, d.rows}, flat(t), {x},
                        [x, d](const Eigen::VectorXd& g) {
                          const RowMatrix gt = MatMap(g.data(), d.cols, d.rows).transpose();
                          accumulate_grad(x, flat(gt));
                        });
}

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return broadcast_binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale");
  return make_op_result("scale", x.shape(), x.data() * factor, {x},
                        [x, factor](const Eigen::VectorXd& g) { accumulate_grad(x, g * factor); });
}

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  Eigen::VectorXd out = x.data().cwiseMax(0.0);
  return make_op_result("relu", x.shape(), std::move(out), {x}, [x](const Eigen::VectorXd& g) {
    accumulate_grad(x, (x.data().array() > 0.0).select(g, 0.0));
  });
}

Tensor sigmoid(const Tensor& x) {
  require_defined(x, "sigmoid");
  Eigen::VectorXd y = x.data().unaryExpr([](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  Eigen::VectorXd saved = y;
  return make_op_result("sigmoid", x.shape(), std::move(y), {x},
                        [x, y = std::move(saved)](const Eigen::VectorXd& g) {
                          accumulate_grad(x, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
                        });
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  require_defined(x, "dropout");
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: p must lie in [0, 1)");
  if (!train || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Eigen::VectorXd mask(x.numel());
  for (Index i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Eigen::VectorXd out = x.data().cwiseProduct(mask);
  return make_op_result("dropout", x.shape(), std::move(out), {x},
                        [x, mask = std::move(mask)](const Eigen::VectorXd& g) {
                          accumulate_grad(x, g.cwiseProduct(mask));
                        });
}

// ---- normalization ----------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "softmax_rows");
  const Dims2 d = as2d(x.shape(), "softmax_rows");
  const MatMap m = view2d(x.data(), d);
  RowMatrix y = (m.colwise() - m.rowwise().maxCoeff()).array().exp();
  const Eigen::VectorXd row_sums = y.rowwise().sum();
  y.array().colwise() /= row_sums.array();
  Eigen::VectorXd out = flat(y);
  return make_op_result("softmax_rows", x.shape(), out, {x},
                        [x, d, y = std::move(y)](const Eigen::VectorXd& g) {
                          const MatMap gm(g.data(), d.rows, d.cols);
                          const Eigen::VectorXd dot = gm.cwiseProduct(y).rowwise().sum();
                          const RowMatrix gx = y.cwiseProduct(gm.colwise() - dot);
                          accumulate_grad(x, flat(gx));
                        });
}

Tensor normalize_rows(const Tensor& x, double eps) {
  require_defined(x, "normalize_rows");
  if (!(eps > 0.0)) throw ContractError("normalize_rows: eps must be positive");
  const Dims2 d = as2d(x.shape(), "normalize_rows");
  const MatMap m = view2d(x.data(), d);
  const Eigen::VectorXd mu = m.rowwise().mean();
  const RowMatrix centered = m.colwise() - mu;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().mean()) + eps).rsqrt().matrix();
  RowMatrix xhat = centered.array().colwise() * inv_std.array();
  Eigen::VectorXd out = flat(xhat);
  return make_op_result(
      "normalize_rows", x.shape(), out, {x},
      [x, d, xhat = std::move(xhat), inv_std](const Eigen::VectorXd& g) {
        const MatMap gm(g.data(), d.rows, d.cols);
        const Eigen::VectorXd g_mean = gm.rowwise().mean();
        const Eigen::VectorXd gx_mean = gm.cwiseProduct(xhat).rowwise().mean();
        RowMatrix gx = gm.colwise() - g_mean;
        gx -= (xhat.array().colwise() * gx_mean.array()).matrix();
        gx.array().colwise() *= inv_std.array();
        accumulate_grad(x, flat(gx));
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  const Index d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta must have length " + std::to_string(d));
  }
  const Tensor x2 = x.dim() <= 2 ? x : reshape(x, {x.numel() / d, d});
  const Tensor y = add(mul(normalize_rows(x2, eps), reshape(gamma, {1, d})), reshape(beta, {1, d}));
  return reshape(y, x.shape());
}

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  if (shape == x.shape()) return x;
  return make_op_result("reshape", std::move(shape), x.data(), {x},
                        [x](const Eigen::VectorXd& g) { accumulate_grad(x, g); });
}

Tensor flatten(const Tensor& x) { return reshape(x, {x.numel()}); }

Tensor concat(std::span<const Tensor> parts, Index axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  for (const Tensor& p : parts) require_defined(p, "concat");
  const Shape& first = parts.front().shape();
  const Index rank = static_cast<Index>(first.size());
  axis = normalize_axis(axis, rank, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = static_cast<Index>(s.size()) == rank;
    for (Index i = 0; ok && i < rank; ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: ragged shapes " + to_string(first) + " and " + to_string(s));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit outer = axis_split(out_shape, axis);
  Eigen::VectorXd out(numel(out_shape));
  std::vector<Index> offsets;
  Index offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const Index ext = p.shape()[axis];
    for (Index o = 0; o < outer.outer; ++o) {
      out.segment((o * outer.extent + offset) * outer.inner, ext * outer.inner) =
          p.data().segment(o * ext * outer.inner, ext * outer.inner);
    }
    offset += ext;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op_result("concat", out_shape, std::move(out), inputs,
                        [inputs, offsets, outer, axis](const Eigen::VectorXd& g) {
                          for (size_t k = 0; k < inputs.size(); ++k) {
                            const Tensor& p = inputs[k];
                            if (!p.requires_grad()) continue;
                            const Index ext = p.shape()[axis];
                            Eigen::VectorXd gp(p.numel());
                            for (Index o = 0; o < outer.outer; ++o) {
                              gp.segment(o * ext * outer.inner, ext * outer.inner) = g.segment(
                                  (o * outer.extent + offsets[k]) * outer.inner, ext * outer.inner);
                            }
                            accumulate_grad(p, gp);
                          }
                        });
}

Tensor slice(const Tensor& x, Index axis, Index start, Index length) {
  require_defined(x, "slice");
  axis = normalize_axis(axis, x.dim(), "slice");
  const Shape& s = x.shape();
  if (start < 0 || length <= 0 || start + length > s[axis]) {
    throw DimensionError("slice: range out of bounds for axis of extent " + std::to_string(s[axis]));
  }
  if (start == 0 && length == s[axis]) return x;
  const AxisSplit in = axis_split(s, axis);
  Shape out_shape = s;
  out_shape[axis] = length;
  Eigen::VectorXd out(numel(out_shape));
  for (Index o = 0; o < in.outer; ++o) {
    out.segment(o * length * in.inner, length * in.inner) =
        x.data().segment((o * in.extent + start) * in.inner, length * in.inner);
  }
  return make_op_result("slice", out_shape, std::move(out), {x},
                        [x, in, start, length](const Eigen::VectorXd& g) {
                          Eigen::VectorXd gx = Eigen::VectorXd::Zero(x.numel());
                          for (Index o = 0; o < in.outer; ++o) {
                            gx.segment((o * in.extent + start) * in.inner, length * in.inner) =
                                g.segment(o * length * in.inner, length * in.inner);
                          }
                          accumulate_grad(x, gx);
                        });
}

std::vector<Tensor> split(const Tensor& x, Index axis, Index parts) {
  require_defined(x, "split");
  axis = normalize_axis(axis, x.dim(), "split");
  if (parts <= 0 || x.shape()[axis] % parts != 0) {
    throw DimensionError("split: axis extent " + std::to_string(x.shape()[axis]) +
                         " not divisible into " + std::to_string(parts) + " parts");
  }
  const Index len = x.shape()[axis] / parts;
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(parts));
  for (Index i = 0; i < parts; ++i) out.push_back(slice(x, axis, i * len, len));
  return out;
}

Tensor stack(std::span<const Tensor> parts, Index axis) {
  if (parts.empty()) throw ContractError("stack: no inputs");
  const Shape& first = parts.front().shape();
  axis = normalize_axis(axis, static_cast<Index>(first.size()) + 1, "stack");
  Shape expanded = first;
  expanded.insert(expanded.begin() + axis, 1);
  std::vector<Tensor> reshaped;
  reshaped.reserve(parts.size());
  for (const Tensor& p : parts) {
    if (p.shape() != first) {
      throw DimensionError("stack: ragged shapes " + to_string(first) + " and " + to_string(p.shape()));
    }
    reshaped.push_back(reshape(p, expanded));
  }
  return concat(reshaped, axis);
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  return make_op_result("sum", {1}, Eigen::VectorXd::Constant(1, x.data().sum()), {x},
                        [x](const Eigen::VectorXd& g) {
                          accumulate_grad(x, Eigen::VectorXd::Constant(x.numel(), g[0]));
                        });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor huber_mean(const Tensor& pred, const Tensor& ref, double delta) {
  require_defined(pred, "huber_mean");
  require_defined(ref, "huber_mean");
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  if (pred.shape() != ref.shape()) {
    throw DimensionError("huber_mean: prediction " + to_string(pred.shape()) +
                         " vs reference " + to_string(ref.shape()));
  }
  const Eigen::ArrayXd e = (ref.data() - pred.data()).array();
  const Eigen::ArrayXd abs_e = e.abs();
  const Eigen::ArrayXd loss =
      (abs_e <= delta).select(0.5 * e.square(), delta * abs_e - 0.5 * delta * delta);
  const double n = static_cast<double>(pred.numel());
  // d huber / d e, clipped at +-delta.
  Eigen::VectorXd de = e.max(-delta).min(delta).matrix() / n;
  return make_op_result("huber_mean", {1}, Eigen::VectorXd::Constant(1, loss.sum() / n), {pred, ref},
                        [pred, ref, de = std::move(de)](const Eigen::VectorXd& g) {
                          accumulate_grad(pred, -g[0] * de);
                          accumulate_grad(ref, g[0] * de);
                        });
}

// ---- convolutions -------------------------------------------------------------

Tensor unfold_patches(const Tensor& x, Index patch) {
  require_defined(x, "unfold_patches");
  if (x.dim() != 3) throw DimensionError("unfold_patches: expected T×W×H input, got " + to_string(x.shape()));
  if (patch < 1) throw DimensionError("unfold_patches: patch size must be >= 1");
  const Index t_in = x.size(0), w = x.size(1), h = x.size(2);
  if (patch > w || patch > h) {
    throw DimensionError("unfold_patches: patch size " + std::to_string(patch) +
                         " exceeds input " + to_string(x.shape()));
  }
  const Index pw = (w + patch - 1) / patch;
  const Index ph = (h + patch - 1) / patch;
  const Index n = pw * ph;
  const Index width = t_in * patch * patch;
  // index[k] is the source element of output k, or -1 for padding.
  std::vector<Index> index(static_cast<size_t>(n * width), -1);
  for (Index a = 0; a < pw; ++a) {
    for (Index b = 0; b < ph; ++b) {
      const Index row = a * ph + b;
      for (Index t = 0; t < t_in; ++t) {
        for (Index i = 0; i < patch; ++i) {
          for (Index j = 0; j < patch; ++j) {
            const Index wi = a * patch + i, hj = b * patch + j;
            if (wi < w && hj < h) {
              index[static_cast<size_t>(row * width + (t * patch + i) * patch + j)] =
                  (t * w + wi) * h + hj;
            }
          }
        }
      }
    }
  }
  Eigen::VectorXd out(n * width);
  for (Index k = 0; k < out.size(); ++k) {
    const Index src = index[static_cast<size_t>(k)];
    out[k] = src >= 0 ? x.data()[src] : 0.0;
  }
  return make_op_result("unfold_patches", {n, width}, std::move(out), {x},
                        [x, index = std::move(index)](const Eigen::VectorXd& g) {
                          Eigen::VectorXd gx = Eigen::VectorXd::Zero(x.numel());
                          for (size_t k = 0; k < index.size(); ++k) {
                            if (index[k] >= 0) gx[index[k]] += g[static_cast<Index>(k)];
                          }
                          accumulate_grad(x, gx);
                        });
}

Tensor conv_patchify(const Tensor& x, const Tensor& kernel, const Tensor& bias, Index patch) {
  require_defined(kernel, "conv_patchify");
  if (kernel.dim() != 4 || kernel.size(2) != patch || kernel.size(3) != patch ||
      (x.defined() && x.dim() == 3 && kernel.size(1) != x.size(0))) {
    throw DimensionError("conv_patchify: kernel " + to_string(kernel.shape()) +
                         " incompatible with input and patch size " + std::to_string(patch));
  }
  const Index d = kernel.size(0);
  if (bias.numel() != d) throw DimensionError("conv_patchify: bias must have length " + std::to_string(d));
  const Tensor cols = unfold_patches(x, patch);
  const Tensor k2 = reshape(kernel, {d, kernel.numel() / d});
  return add(matmul(k2, transpose(cols)), reshape(bias, {d, 1}));
}

Tensor conv1d_embed(const Tensor& a, const Tensor& kernel, const Tensor& bias) {
  require_defined(a, "conv1d_embed");
  require_defined(kernel, "conv1d_embed");
  if (kernel.dim() == 3 && kernel.size(2) != 1) {
    throw DimensionError("conv1d_embed: only pointwise (width 1) kernels are supported");
  }
  if (a.dim() != 2 || kernel.dim() < 2 || kernel.dim() > 3 || kernel.size(1) != a.size(0)) {
    throw DimensionError("conv1d_embed: kernel " + to_string(kernel.shape()) +
                         " incompatible with input " + to_string(a.shape()));
  }
  const Index c_out = kernel.size(0);
  if (bias.numel() != c_out) {
    throw DimensionError("conv1d_embed: bias must have length " + std::to_string(c_out));
  }
  const Tensor k2 = reshape(kernel, {c_out, kernel.size(1)});
  return add(matmul(k2, a), reshape(bias, {c_out, 1}));
}

}  // namespace scawave::ad
