#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape owns every value produced during a forward pass. Var is a handle
// (tape pointer + node id). Each primitive computes its forward value
// eagerly, appends one node, and registers a closure that maps the node's
// output gradient to its inputs' gradients. backward() walks the nodes once,
// newest to oldest.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tarif/linalg.hpp"

namespace tarif::ad {

class Tape;

enum class OpKind {
  Leaf,
  Constant,
  Detach,
  MatMul,
  Transpose,
  Add,
  AddRow,
  Sub,
  Scale,
  AddScalar,
  ScaleBy,
  Hadamard,
  RowSoftmax,
  Sigmoid,
  Relu,
  Log1p,
  Exp,
  Power,
  Sharpen,
  RowSum,
  Sum,
  LayerNorm,
  ColumnSlice,
  ConcatCols,
  EdgeSoftmaxAggregate,
  MaskedCrossEntropy,
};

const char* op_name(OpKind op) noexcept;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, Index id) : tape_(tape), id_(id) {}

  Index id() const noexcept { return id_; }
  Tape& tape() const;
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const noexcept { return tape_ != nullptr; }
  /// Value of a 1x1 Var.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  Index id_ = -1;
};

/// Gradient accumulator indexed by node id. Missing entries read as zero.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const Tape& tape);

  /// Gradient of the loss w.r.t. v (zero matrix of v's shape if unreachable).
  Matrix operator[](const Var& v) const;
  bool has(Index id) const;

  template <typename Derived>
  void add(Index id, const Eigen::MatrixBase<Derived>& contribution);

  std::size_t visited_nodes() const noexcept { return visited_; }

 private:
  friend Gradients backward(const Var& loss);
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
  std::vector<bool> present_;
  std::size_t visited_ = 0;
};

using BackwardFn = std::function<void(const Tape&, const Matrix& grad_out, Gradients& grads)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter).
  Var leaf(Matrix value);
  /// Input that never receives gradient.
  Var constant(Matrix value);

  /// Appends an op node. All inputs must belong to this tape; the value must
  /// be finite. Returns the handle of the new node.
  Var record(OpKind op, std::initializer_list<Var> inputs, Matrix value, BackwardFn backward);
  Var record(OpKind op, std::span<const Var> inputs, Matrix value, BackwardFn backward);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(Index id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  OpKind op(Index id) const { return nodes_[static_cast<std::size_t>(id)].op; }
  const std::vector<Index>& inputs(Index id) const {
    return nodes_[static_cast<std::size_t>(id)].inputs;
  }
  bool needs_grad(Index id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Bytes held by forward values (the tape's memory footprint).
  std::size_t value_bytes() const noexcept { return value_bytes_; }

 private:
  friend Gradients backward(const Var& loss);
  struct Node {
    OpKind op;
    std::vector<Index> inputs;
    Matrix value;
    BackwardFn backward;
    bool needs_grad;
  };
  void check_owned(const Var& v) const;
  std::vector<Node> nodes_;
  std::size_t value_bytes_ = 0;
};

/// Gradients of a 1x1 loss w.r.t. every node on its tape.
Gradients backward(const Var& loss);

template <typename Derived>
void Gradients::add(Index id, const Eigen::MatrixBase<Derived>& contribution) {
  const auto i = static_cast<std::size_t>(id);
  if (!tape_->needs_grad(id)) return;
  if (!present_[i]) {
    grads_[i] = contribution;
    present_[i] = true;
  } else {
    grads_[i] += contribution;
  }
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Var detach(const Var& x);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a (n x d) + b (1 x d) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// a * s for a 1x1 Var s.
Var scale_by(const Var& a, const Var& s);
Var hadamard(const Var& a, const Var& b);
Var row_softmax(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var log1p(const Var& a);
Var exp(const Var& a);
/// Element-wise a^c for a constant exponent.
Var power(const Var& a, double c);
/// Element-wise x * log(1 + x^p)^q with 1x1 Vars p, q; x >= 0, p, q >= 1.
Var sharpen(const Var& x, const Var& p, const Var& q);
/// n x d -> n x 1.
Var row_sum(const Var& a);
/// -> 1 x 1.
Var sum(const Var& a);
/// Per-row standardization (no affine terms).
Var layer_norm(const Var& a, double eps = 1e-5);
Var column_slice(const Var& a, Index start, Index count);
Var concat_cols(std::span<const Var> parts);

/// Sparse neighbourhood structure (CSR) that includes self-loops.
struct Neighborhoods {
  std::vector<Index> offsets;  // size n + 1
  std::vector<Index> targets;
  Index num_nodes() const { return static_cast<Index>(offsets.size()) - 1; }
  Index num_entries() const { return static_cast<Index>(targets.size()); }
};

/// Attention-weighted neighbour sum:
///   e_ij  = leaky_relu(self_score_i + neighbor_score_j, slope)
///   a_ij  = softmax_j over neighbourhood(i) of e_ij
///   out_i = sum_j a_ij * values_j
/// self_score and neighbor_score are n x 1. When `weights_out` is non-null it
/// receives a_ij in CSR order.
Var edge_softmax_aggregate(const Neighborhoods& nbrs, const Var& values, const Var& self_score,
                           const Var& neighbor_score, double slope,
                           std::vector<double>* weights_out = nullptr);

/// Mean softmax cross-entropy over the rows listed in `rows`.
Var masked_cross_entropy(const Var& logits, std::span<const int> labels,
                         std::span<const Index> rows);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Builds a scalar loss on `tape` from parameter leaves (same order as the
/// parameter list passed to grad_check).
using LossFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  /// Per parameter: |g_ad - g_fd| / max(|g_fd|, floor), norms taken over the
  /// whole parameter tensor.
  std::vector<double> relative_errors;
  /// Per parameter: largest coordinate-wise |g_ad - g_fd|.
  std::vector<double> max_abs_errors;
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  /// Step reductions forced by kinks inside the stencil.
  std::size_t kink_coordinates = 0;
};

struct GradCheckOptions {
  /// Lower bound on the denominator of the relative error.
  double floor = 1e-8;
  /// Re-estimate with steps h/10, h/100, h/1000 until two successive
  /// central differences agree (ReLU-type kinks inside the stencil).
  bool kink_retry = false;
};

/// Compares reverse-mode gradients with central differences
/// (f(theta + h) - f(theta - h)) / 2h, one coordinate at a time.
GradCheckReport grad_check(const LossFn& loss, std::span<const Matrix> params, double step = 1e-5,
                           const GradCheckOptions& options = {});

}  // namespace tarif::ad
