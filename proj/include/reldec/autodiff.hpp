#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "reldec/tensor.hpp"

namespace reldec::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
// node list is already topologically sorted and backward() is one reverse
// sweep. A tape is single-owner; parameters referenced through constant_ref /
// variable_ref must outlive it.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var constant_ref(const Tensor& value);
  Var variable(Tensor value);
  Var variable_ref(const Tensor& value);

  const Tensor& value(Var v) const { return node_value(v.id()); }
  const Tensor& node_value(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward() loss w.r.t. v; zeros when v was unused
  // or does not require gradients.
  Tensor grad(Var v) const;

  // Clears previous gradients, seeds d(loss)/d(loss) = 1 and sweeps back.
  void backward(Var loss);

  // backward(loss) followed by grad() for each requested variable.
  std::vector<Tensor> gradients(Var loss, std::span<const Var> wrt);

  // --- op-author interface ---
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
  }
  // Gradient accumulator of node `id`, or nullptr when it needs no gradient.
  double* grad_ptr(std::size_t id);
  const double* grad_data(std::size_t id) const;

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };

  void check_owner(Var v) const;

  std::deque<Node> nodes_;  // deque: values stay put as the tape grows
};

// ---- primitives -----------------------------------------------------------
// Shape mismatches throw std::invalid_argument naming both shapes. Every
// result is checked for finiteness (std::domain_error otherwise).

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);

// W[m x n] * x[n] -> [m]
Var matvec(Var w, Var x);
// W x + b
Var affine(Var w, Var x, Var b);
// A[m x k] * B[k x n] -> [m x n]
Var matmul(Var a, Var b);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice(Var v, std::size_t offset, std::size_t length);

// Row k of a matrix, as a vector.
Var row_select(Var m, std::size_t k);
// Rows at `indices`, in that order, as a matrix.
Var gather_rows(Var m, std::span<const std::size_t> indices);
// Stacks equal-length vectors into a matrix.
Var stack_rows(std::span<const Var> rows);
// M[r x c] + v[c] added to every row.
Var add_rowwise(Var m, Var v);
// d[k] weighting the rows of M[k x n]: returns d^T M, differentiable in both.
Var weighted_row_sum(Var d, Var m);

Var softmax(Var v);
Var softmax_rows(Var m);
Var log_softmax(Var v);

Var dot(Var a, Var b);
Var sum(Var a);
Var pick(Var v, std::size_t k);
Var add_n(std::span<const Var> scalars);

// Non-differentiable helpers shared with the decoders.
std::vector<double> softmax_values(std::span<const double> v);
std::vector<double> log_softmax_values(std::span<const double> v);

}  // namespace reldec::ad
