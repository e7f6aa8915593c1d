#pragma once

// Reverse-mode differentiation over a linear record of primitive operations.
//
// Nodes are appended in evaluation order, so walking them backwards is a
// reverse topological order: every node is visited once, after all of its
// consumers. Gradients accumulate additively into per-node buffers.

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "pgdcrnn/sparse.hpp"
#include "pgdcrnn/tensor.hpp"

namespace pgdcrnn {

class Tape;

/// Handle to a node on a tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape &, std::size_t self)>;

  /// A leaf that does not receive gradients (inputs, targets).
  Var constant(Tensor value);
  /// A leaf that receives gradients (parameters).
  Var variable(Tensor value);

  /// Appends an op node. `inputs` decide whether the node needs a gradient.
  Var record(Tensor value, const std::vector<Var> &inputs, BackwardFn backward);

  const Tensor &value(Var v) const;
  /// Gradient of the last backward() target w.r.t. `v`; zeros if unreached.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a scalar node
  /// of this tape. Gradients of earlier calls are discarded first.
  void backward(Var loss);

  /// Gradient buffer of node `id`, allocated as zeros on first use. Only
  /// meaningful inside backward functions.
  Tensor &grad_buffer(std::size_t id);
  const Tensor &value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  const Node &node(Var v) const;

  std::vector<Node> nodes_;
};

namespace ops {

Var matmul(Tape &t, Var a, Var b);
/// S * X where X [rows x cols] is read as [S.cols x (rows*cols/S.cols)].
/// With node-major batched rows (row = node * batch + b) this applies S to
/// every batch element at once. `s_transpose` must equal S^T.
Var spmm(Tape &t, const SparseMatrix &s, const SparseMatrix &s_transpose, Var x);
Var add(Tape &t, Var a, Var b);
Var sub(Tape &t, Var a, Var b);
Var hadamard(Tape &t, Var a, Var b);
Var sigmoid(Tape &t, Var x);
Var tanh(Tape &t, Var x);
/// 1 - x
Var one_minus(Tape &t, Var x);
Var scale(Tape &t, Var x, double factor);
/// x [R x C] + b [C] broadcast over rows.
Var add_bias(Tape &t, Var x, Var bias);
Var concat_cols(Tape &t, const std::vector<Var> &parts);
/// Rows of all parts stacked in order.
Var concat_rows(Tape &t, const std::vector<Var> &parts);
Var slice_cols(Tape &t, Var x, std::size_t begin, std::size_t end);
/// mean |pred - target| as a scalar.
Var mean_abs_error(Tape &t, Var pred, Var target);

}  // namespace ops

double sigmoid(double x) noexcept;

}  // namespace pgdcrnn
