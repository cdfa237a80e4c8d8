/* Copyright 2026 The LEAT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Reverse-mode automatic differentiation over a linear tape.
//
// A Tape owns every value produced while it is active. Var is a cheap handle
// (tape pointer + slot index). Primitives append a node holding the forward
// value, the input slots, and whatever constant data the local derivative
// needs. backward() sweeps the tape in reverse into a scratch adjoint buffer,
// so the tape itself is never modified and can be differentiated repeatedly.
//
// The primitive set is deliberately small: affine maps with frozen weights,
// element-wise activations, reshape, concatenation, addition, scaling,
// Hadamard product, mean, mean squared difference and the L2 norm.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "leat/error.hpp"
#include "leat/tensor.hpp"

namespace leat {

enum class Activation { tanh, relu, sigmoid };

inline std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "unknown";
}

inline double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::tanh:
      return std::tanh(x);
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Derivative expressed through the input x and output y. relu'(0) == 0.
inline double activate_derivative(Activation kind, double x, double y) {
  switch (kind) {
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return y * (1.0 - y);
  }
  return 1.0;
}

using TensorPtr = std::shared_ptr<const Tensor>;

/// Named, immutable weights of one network stage plus the seed they were
/// drawn from.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::uint64_t seed) : seed_(seed) {}

  void add(const std::string& name, Tensor value) {
    if (!entries_.emplace(name, std::make_shared<const Tensor>(std::move(value)))
             .second) {
      throw ContractError("duplicate parameter '" + name + "'");
    }
  }

  const TensorPtr& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw ContractError("missing parameter '" + name + "'");
    }
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::uint64_t seed() const { return seed_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t->numel();
    return n;
  }

  const std::map<std::string, TensorPtr>& entries() const { return entries_; }

  // Element-wise identical contents (the pointers may differ).
  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.seed_ != b.seed_ || a.entries_.size() != b.entries_.size()) return false;
    for (auto ia = a.entries_.begin(), ib = b.entries_.begin();
         ia != a.entries_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || !(*ia->second == *ib->second)) return false;
    }
    return true;
  }

 private:
  std::uint64_t seed_ = 0;
  std::map<std::string, TensorPtr> entries_;
};

class Tape;

/// Handle to a value slot on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

enum class OpKind {
  leaf,
  constant,
  affine,
  activation,
  reshape,
  concat,
  add,
  scale,
  hadamard,
  mean,
  mse,
  l2_norm,
};

class Tape {
 public:
  struct Node {
    OpKind op = OpKind::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    TensorPtr weights;
    TensorPtr bias;
    Activation activation = Activation::tanh;
    double factor = 1.0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A differentiable input.
  Var leaf(Tensor value) {
    Node node;
    node.op = OpKind::leaf;
    node.value = std::move(value);
    return push(std::move(node));
  }

  // A value the loss may depend on but which is never differentiated.
  Var constant(Tensor value) {
    Node node;
    node.op = OpKind::constant;
    node.value = std::move(value);
    return push(std::move(node));
  }

  const Tensor& value(const Var& v) const {
    check_owner(v);
    return nodes_[v.index()].value;
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  Var push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape() != this || v.index() >= nodes_.size()) {
      throw LineageError("value does not belong to this tape");
    }
  }

  // Recomputes every derived node from its recorded inputs and reports
  // whether all values come out bitwise identical.
  bool replay_matches() const;

 private:
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (tape_ == nullptr) throw LineageError("unbound Var");
  return tape_->value(*this);
}

namespace detail {

inline Tape& common_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw LineageError("operands recorded on different tapes");
  }
  return *a.tape();
}

inline Tensor affine_forward(const Tensor& input, const Tensor& weights,
                             const Tensor* bias) {
  if (weights.rank() != 2) {
    throw DimensionError("affine: weights must be rank 2, got " +
                         shape_string(weights.shape()));
  }
  const std::size_t out = weights.shape()[0];
  const std::size_t in = weights.shape()[1];
  if (input.shape().back() != in) {
    throw DimensionError("affine: input shape " + shape_string(input.shape()) +
                         " incompatible with weights " +
                         shape_string(weights.shape()));
  }
  if (bias != nullptr && bias->shape() != Shape{out}) {
    throw DimensionError("affine: bias shape " + shape_string(bias->shape()) +
                         " incompatible with weights " +
                         shape_string(weights.shape()));
  }
  Shape out_shape = input.shape();
  out_shape.back() = out;
  Tensor result(out_shape);
  const std::size_t rows = input.numel() / in;
  const double* w = weights.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data().data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias != nullptr ? (*bias)[o] : 0.0;
      const double* wrow = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
      result[r * out + o] = acc;
    }
  }
  return result;
}

inline Tensor concat_forward(const std::vector<const Tensor*>& parts) {
  std::vector<double> data;
  for (const Tensor* p : parts) {
    data.insert(data.end(), p->data().begin(), p->data().end());
  }
  return Tensor::vector(std::move(data));
}

inline double mse_forward(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.numel());
}

// Forward rule shared by the primitives and Tape::replay_matches().
inline Tensor evaluate_node(const Tape::Node& node,
                            const std::vector<Tape::Node>& nodes) {
  auto in = [&](std::size_t k) -> const Tensor& {
    return nodes[node.inputs[k]].value;
  };
  switch (node.op) {
    case OpKind::leaf:
    case OpKind::constant:
      return node.value;
    case OpKind::affine:
      return affine_forward(in(0), *node.weights, node.bias.get());
    case OpKind::activation: {
      const Activation kind = node.activation;
      return map(in(0), [kind](double x) { return activate(kind, x); });
    }
    case OpKind::reshape:
      return in(0).reshaped(node.value.shape());
    case OpKind::concat: {
      std::vector<const Tensor*> parts;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) parts.push_back(&in(k));
      return concat_forward(parts);
    }
    case OpKind::add:
      return in(0) + in(1);
    case OpKind::scale:
      return node.factor * in(0);
    case OpKind::hadamard:
      return zip(in(0), in(1), std::multiplies<>(), "hadamard");
    case OpKind::mean: {
      double sum = 0.0;
      for (double v : in(0).values()) sum += v;
      return Tensor::scalar(sum / static_cast<double>(in(0).numel()));
    }
    case OpKind::mse:
      return Tensor::scalar(mse_forward(in(0), in(1)));
    case OpKind::l2_norm:
      return Tensor::scalar(l2_norm(in(0)));
  }
  throw ContractError("unknown tape op");
}

inline Var record(Tape& tape, OpKind op, std::vector<std::size_t> inputs,
                  TensorPtr weights = nullptr, TensorPtr bias = nullptr,
                  Activation activation = Activation::tanh, double factor = 1.0,
                  Shape reshape_to = {}) {
  Tape::Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.weights = std::move(weights);
  node.bias = std::move(bias);
  node.activation = activation;
  node.factor = factor;
  if (op == OpKind::reshape) node.value = Tensor(std::move(reshape_to));
  node.value = evaluate_node(node, tape.nodes());
  return tape.push(std::move(node));
}

}  // namespace detail

inline bool Tape::replay_matches() const {
  for (const Node& node : nodes_) {
    for (std::size_t in : node.inputs) {
      if (&node - nodes_.data() <= static_cast<std::ptrdiff_t>(in)) return false;
    }
    if (!(detail::evaluate_node(node, nodes_) == node.value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Primitives

/// weights·input + bias over the last dimension of input. weights is [out, in],
/// bias is [out] (or null for no bias).
inline Var forward_affine(const Var& input, TensorPtr weights, TensorPtr bias) {
  Tape& tape = *input.tape();
  tape.check_owner(input);
  return detail::record(tape, OpKind::affine, {input.index()}, std::move(weights),
                        std::move(bias));
}

inline Var activation(const Var& input, Activation kind) {
  Tape& tape = *input.tape();
  tape.check_owner(input);
  return detail::record(tape, OpKind::activation, {input.index()}, nullptr,
                        nullptr, kind);
}

inline Var tanh(const Var& x) { return activation(x, Activation::tanh); }
inline Var relu(const Var& x) { return activation(x, Activation::relu); }
inline Var sigmoid(const Var& x) { return activation(x, Activation::sigmoid); }

inline Var reshape(const Var& input, Shape shape) {
  Tape& tape = *input.tape();
  tape.check_owner(input);
  if (shape_numel(shape) != input.value().numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(input.shape()) +
                         " as " + shape_string(shape));
  }
  return detail::record(tape, OpKind::reshape, {input.index()}, nullptr, nullptr,
                        Activation::tanh, 1.0, std::move(shape));
}

inline Var flatten(const Var& input) {
  return reshape(input, {input.value().numel()});
}

// Rank-1 concatenation of the flattened parts.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<std::size_t> inputs;
  for (const Var& p : parts) {
    detail::common_tape(parts.front(), p);
    inputs.push_back(p.index());
  }
  return detail::record(*parts.front().tape(), OpKind::concat, std::move(inputs));
}

inline Var add(const Var& a, const Var& b) {
  Tape& tape = detail::common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return detail::record(tape, OpKind::add, {a.index(), b.index()});
}

inline Var scale(const Var& a, double factor) {
  Tape& tape = *a.tape();
  tape.check_owner(a);
  return detail::record(tape, OpKind::scale, {a.index()}, nullptr, nullptr,
                        Activation::tanh, factor);
}

inline Var hadamard(const Var& a, const Var& b) {
  Tape& tape = detail::common_tape(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  return detail::record(tape, OpKind::hadamard, {a.index(), b.index()});
}

inline Var mean(const Var& a) {
  Tape& tape = *a.tape();
  tape.check_owner(a);
  return detail::record(tape, OpKind::mean, {a.index()});
}

/// Mean of squared element-wise differences.
inline Var mse_loss(const Var& a, const Var& b) {
  Tape& tape = detail::common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mse_loss");
  return detail::record(tape, OpKind::mse, {a.index(), b.index()});
}

inline Var l2_norm(const Var& a) {
  Tape& tape = *a.tape();
  tape.check_owner(a);
  return detail::record(tape, OpKind::l2_norm, {a.index()});
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// Untracked mse on plain tensors.
inline double mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_loss");
  return detail::mse_forward(a, b);
}

// ---------------------------------------------------------------------------
// Reverse sweep

/// d(loss)/d(wrt). loss must be a scalar on the same tape as wrt. The tape is
/// left untouched. A wrt the loss does not depend on gets a zero gradient.
inline Tensor backward(const Var& loss, const Var& wrt) {
  if (loss.tape() == nullptr) throw LineageError("backward: unbound loss");
  Tape& tape = *loss.tape();
  tape.check_owner(loss);
  if (wrt.tape() != &tape || wrt.index() >= tape.size()) {
    throw LineageError("backward: wrt is not recorded on the loss's tape");
  }
  if (!loss.value().is_scalar()) {
    throw DimensionError("backward: loss must be scalar, got shape " +
                         shape_string(loss.shape()));
  }
  const auto& nodes = tape.nodes();
  if (wrt.index() > loss.index()) return Tensor::zeros_like(wrt.value());

  std::vector<Tensor> adj(loss.index() + 1);
  std::vector<bool> live(loss.index() + 1, false);
  auto accumulate = [&](std::size_t slot, auto&& fill) {
    if (!live[slot]) {
      adj[slot] = Tensor::zeros_like(nodes[slot].value);
      live[slot] = true;
    }
    fill(adj[slot]);
  };
  adj[loss.index()] = Tensor::scalar(1.0);
  live[loss.index()] = true;

  for (std::size_t idx = loss.index() + 1; idx-- > wrt.index() + 1;) {
    if (!live[idx]) continue;
    const Tape::Node& node = nodes[idx];
    const Tensor& g = adj[idx];
    switch (node.op) {
      case OpKind::leaf:
      case OpKind::constant:
        break;
      case OpKind::affine: {
        const Tensor& w = *node.weights;
        const std::size_t out = w.shape()[0];
        const std::size_t in = w.shape()[1];
        const std::size_t rows = g.numel() / out;
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < out; ++o) {
              const double go = g[r * out + o];
              if (go == 0.0) continue;
              const double* wrow = w.data().data() + o * in;
              for (std::size_t i = 0; i < in; ++i) a[r * in + i] += go * wrow[i];
            }
          }
        });
        break;
      }
      case OpKind::activation: {
        const Tensor& x = nodes[node.inputs[0]].value;
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) {
            a[i] += g[i] * activate_derivative(node.activation, x[i], node.value[i]);
          }
        });
        break;
      }
      case OpKind::reshape:
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += g[i];
        });
        break;
      case OpKind::concat: {
        std::size_t offset = 0;
        for (std::size_t in : node.inputs) {
          const std::size_t n = nodes[in].value.numel();
          accumulate(in, [&](Tensor& a) {
            for (std::size_t i = 0; i < n; ++i) a[i] += g[offset + i];
          });
          offset += n;
        }
        break;
      }
      case OpKind::add:
        for (std::size_t in : node.inputs) {
          accumulate(in, [&](Tensor& a) { a += g; });
        }
        break;
      case OpKind::scale:
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += node.factor * g[i];
        });
        break;
      case OpKind::hadamard: {
        const Tensor& lhs = nodes[node.inputs[0]].value;
        const Tensor& rhs = nodes[node.inputs[1]].value;
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += g[i] * rhs[i];
        });
        accumulate(node.inputs[1], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += g[i] * lhs[i];
        });
        break;
      }
      case OpKind::mean: {
        const double each = g[0] / static_cast<double>(nodes[node.inputs[0]].value.numel());
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += each;
        });
        break;
      }
      case OpKind::mse: {
        const Tensor& lhs = nodes[node.inputs[0]].value;
        const Tensor& rhs = nodes[node.inputs[1]].value;
        const double c = 2.0 * g[0] / static_cast<double>(lhs.numel());
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += c * (lhs[i] - rhs[i]);
        });
        accumulate(node.inputs[1], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] -= c * (lhs[i] - rhs[i]);
        });
        break;
      }
      case OpKind::l2_norm: {
        const Tensor& x = nodes[node.inputs[0]].value;
        const double norm = node.value[0];
        if (norm == 0.0) break;
        accumulate(node.inputs[0], [&](Tensor& a) {
          for (std::size_t i = 0; i < a.numel(); ++i) a[i] += g[0] * x[i] / norm;
        });
        break;
      }
    }
  }
  if (!live[wrt.index()]) return Tensor::zeros_like(wrt.value());
  return adj[wrt.index()];
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
inline Tensor finite_difference_gradient(
    const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference_gradient: h must be > 0");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Loss value and gradient of a scalar function built on a fresh tape.
struct ValueAndGradient {
  double value = 0.0;
  Tensor gradient;
};

inline ValueAndGradient value_and_gradient(
    const std::function<Var(Tape&, const Var&)>& fn, const Tensor& x) {
  Tape tape;
  const Var input = tape.leaf(x);
  const Var loss = fn(tape, input);
  return {loss.value().item(), backward(loss, input)};
}

// Evaluates fn on a scratch tape and returns only the value.
inline Tensor evaluate(const std::function<Var(Tape&, const Var&)>& fn,
                       const Tensor& x) {
  Tape tape;
  return fn(tape, tape.constant(x)).value();
}

}  // namespace leat
