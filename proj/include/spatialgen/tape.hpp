#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spatialgen/tensor.hpp"

namespace spatialgen::ad {

using VarId = std::size_t;

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  VarId id() const noexcept { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, VarId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  VarId id_ = 0;
};

/// Adjoints of every recorded tensor with respect to one scalar loss.
class Gradients {
 public:
  const Tensor& operator[](Var v) const { return grads_.at(v.id()); }
  const Tensor& of(VarId id) const { return grads_.at(id); }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

/// What a primitive's adjoint rule sees during the reverse sweep.
struct BackwardContext {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& output_grad;
  /// Accumulators for each input, zero-initialised, same shapes as `inputs`.
  std::span<Tensor* const> input_grads;
};

/// Append-only record of primitive applications. Insertion order is topological
/// order; backward walks it in strict reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const BackwardContext&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records an input tensor (parameter or constant).
  Var leaf(Tensor value);

  /// Records the output of a primitive. Throws NonFiniteResult when `value`
  /// contains NaN or Inf.
  Var record(Tensor value, std::vector<VarId> inputs, BackwardFn backward);

  const Tensor& value(VarId id) const { return nodes_.at(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a 1 x 1 `loss`. Does not modify the tape, so it can be
  /// replayed.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<VarId> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// Forward primitives. Each records one node on the operands' tape.

Var matmul(Var a, Var b);
/// Elementwise sum. `b` may also be a 1 x cols row, added to every row of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Concatenation along the column axis.
Var concat(Var a, Var b);
Var leaky_relu(Var a, double slope = 0.2);
/// Row-wise softmax, max-subtracted.
Var softmax(Var a);
Var sigmoid(Var a);
Var sum_sq(Var a);
Var sum(Var a);
Var scale(Var a, double c);
Var gather_rows(Var a, std::span<const std::size_t> ids);
/// out[i] = sum_t weights(i, t) * rows[ids[i * k + t]] where k = weights.cols().
Var weighted_sum(Var rows, std::span<const std::size_t> ids, Var weights);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// Columns [begin, end) of every row.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
Var bce(Var prob, const Tensor& labels);
/// A scalar whose value and gradient with respect to `input` were computed
/// elsewhere (for example on worker tapes).
Var external_scalar(Var input, double value, Tensor grad);

}  // namespace spatialgen::ad
