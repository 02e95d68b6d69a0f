#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "clue/params.hpp"
#include "clue/tensor.hpp"

namespace clue::ag {

class Tape;

// Lightweight handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode autodiff tape. One tape per forward pass; nodes are appended
// in evaluation order so reverse id order is a valid topological order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var input(Tensor value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, {});
  }
  // Leaf bound to a stored parameter. Gradients are tracked iff the
  // parameter is trainable. Repeated calls return the same node.
  Var param(const ParamStore& store, ParamId id);

  // Records an op output. The node requires grad iff any parent does; `fn`
  // is dropped otherwise.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Gradient accumulator for a node, zero-allocated on first use.
  Tensor& grad(int id);
  // Null until the node has received gradient.
  const Tensor* grad_if(int id) const;
  const Tensor* grad_if(Var v) const { return grad_if(v.id()); }

  // Seeds d(root)/d(root) = 1 and runs every backward function. Root must be
  // a single-element tensor.
  void backward(Var root);

  // Adds parameter gradients into `buffer` (indexed by ParamId).
  void accumulate_param_grads(GradBuffer& buffer) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    ParamId param = -1;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn);

  std::deque<Node> nodes_;
  std::vector<int> param_nodes_;  // ParamId -> node id, -1 if absent
};

// ---- ops -----------------------------------------------------------------
// All ops take Vars from the same tape. Rank-2 operands are (rows, cols);
// feature maps are (C, H, W).

// op(a)·op(b) where op transposes when the flag is set.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
// x[n×in]·Wᵀ[in×out] + bias[out]. `bias` may be an invalid Var.
Var linear(Var x, Var weight, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float s);
// x[n×d] + v[d] broadcast over rows.
Var add_row(Var x, Var v);

Var tanh(Var x);
Var relu(Var x);
Var silu(Var x);
Var gelu(Var x);
Var sigmoid(Var x);
// Elementwise clamp; zero gradient where the bound is active.
Var clamp(Var x, float lo, float hi);

// Normalizes each row over its last dimension.
Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);
Var softmax_rows(Var x);
Var transpose(Var x);
Var reshape(Var x, std::vector<int> shape);
// Concatenation along axis 0 (channels for feature maps).
Var concat(const std::vector<Var>& parts);

// x[Ci×H×W] ⊛ W[Co×Ci×k×k] with zero padding; bias may be invalid.
Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
Var group_norm(Var x, int groups, Var gamma, Var beta, float eps = 1e-5f);
// Bilinear resize with half-pixel centers (align_corners = false).
Var resize_bilinear(Var x, int out_h, int out_w);

Var sum(Var x);
Var mean(Var x);

}  // namespace clue::ag
