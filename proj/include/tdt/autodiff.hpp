#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "tdt/tensor.hpp"

namespace tdt {

class Tape;
using NodeId = int32_t;

// A value in a differentiable computation. Either tracked (lives as a node
// on a Tape) or an untracked constant. Ops record themselves on the
// operands' tape when one exists; ops on constants alone just compute.
// Eval-mode forward passes run entirely on constants, so no tape is built.
class Var {
 public:
  Var() = default;
  static Var constant(Tensor v);

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = -1;
  std::shared_ptr<const Tensor> const_value_;
};

// Gradients of a scalar loss with respect to tape leaves, keyed by leaf id.
// Every leaf of the tape gets an entry; leaves the loss never touched get
// zero tensors.
class GradientMap {
 public:
  const Tensor& at(NodeId leaf_id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::map<NodeId, Tensor> grads_;
};

using BackwardFn =
    std::function<void(const Tensor& gout, Tape& tape, std::vector<Tensor>& grads)>;

struct TapeNode {
  const char* op;
  std::vector<NodeId> inputs;  // tracked inputs only; all < this node's id
  Tensor value;
  BackwardFn backward;  // empty for leaves and constants
};

// Append-only record of one forward pass (define-by-run; rebuilt per pass).
// Nodes are stored in a deque so references stay valid as the tape grows.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A gradient-carrying input (model parameter, probe value).
  Var leaf(Tensor value);

  // Reverse pass from a scalar loss. Produces a gradient for every leaf.
  GradientMap backward(const Var& loss);

  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }
  const TapeNode& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  const std::vector<NodeId>& leaf_ids() const { return leaf_ids_; }

  NodeId add_node(const char* op, std::vector<NodeId> inputs, Tensor value, BackwardFn fn);
  // Handle to an existing node; op implementations wrap freshly added nodes.
  Var var(NodeId id) { return Var(this, id); }
  // Adds `contribution` into grads[id], allocating zeros on first touch.
  static void accumulate(std::vector<Tensor>& grads, NodeId id, const Tensor& contribution);

 private:
  std::deque<TapeNode> nodes_;
  std::vector<NodeId> leaf_ids_;
};

// ---- differentiable ops ----------------------------------------------------
// Shapes are validated at every boundary; violations throw ShapeError naming
// the op and both shapes.

Var matmul(const Var& a, const Var& b);            // [m x k] * [k x n]
Var add(const Var& a, const Var& b);               // elementwise, same shape
Var add_bias(const Var& x, const Var& b);          // [r x c] + [c], broadcast over rows
Var mul(const Var& a, const Var& b);               // elementwise, same shape
Var tanh_op(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var reshape(const Var& x, std::vector<int64_t> shape);
Var slice_cols(const Var& x, int64_t c0, int64_t c1);   // [r x C] -> [r x (c1-c0)]
Var slice_time(const Var& x, int64_t t);                // [B x T x D] -> [B x D]
Var stack_time(std::span<const Var> steps);             // T of [B x D] -> [B x T x D]

// Rows of `table` gathered by token id, shaped [batch x time x dim].
// ids is row-major [batch x time]; every id must be < table rows.
Var embed(const Var& table, const std::vector<int>& ids, int64_t batch, int64_t time);

// Mean over rows of -log softmax(logits)[target], max-stabilized.
// Scalar output. Targets must index into [0, classes).
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets);

// Eval-path helper: row-wise softmax of a plain tensor.
Tensor softmax_rows(const Tensor& logits);

// ---- gradient verification -------------------------------------------------

// Central-difference check of a scalar function of `params`.
//
// f(grads): returns the loss at the current parameter values; when `grads`
// is non-null it must also fill tape gradients, ordered like `params`.
// For every parameter coordinate the tape gradient is compared against
// (f(p+eps) - f(p-eps)) / 2eps. Returns the worst relative error, with the
// denominator max(|analytic|, |numeric|) floored at 1e-8.
double grad_check(const std::function<double(std::vector<Tensor>*)>& f,
                  const std::vector<Tensor*>& params, double epsilon);

}  // namespace tdt
