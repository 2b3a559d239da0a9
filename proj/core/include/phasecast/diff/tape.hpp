#pragma once

#include <cstddef>
#include <deque>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "phasecast/diff/tensor.hpp"

namespace phasecast::diff {

enum class OpKind {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,       // same shape, or second operand a 1 x N row broadcast over rows
  kSub,       // same broadcasting rule as kAdd
  kMul,       // elementwise, same broadcasting rule as kAdd
  kScale,     // multiply by attrs.scalar
  kConcat,    // along columns
  kSlice,     // columns [attrs.begin, attrs.end)
  kSigmoid,
  kTanh,
  kSoftmax,     // row-wise
  kLogSoftmax,  // row-wise
  kLog,
  kLogSigmoid,  // log(sigmoid(x)) evaluated without overflow
  kSum,         // all elements -> scalar
  kRowSum,      // R x C -> R x 1
  kGatherRows,  // output row i = input row attrs.indices[i]
};

std::string_view op_name(OpKind op);

struct OpAttrs {
  double scalar = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> indices;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of a scalar with respect to the leaves of a tape.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> by_node) : by_node_(std::move(by_node)) {}

  // Zero tensor of the leaf's shape if the leaf did not influence the loss.
  const Tensor& of(Var leaf) const { return by_node_.at(leaf.id()); }

 private:
  std::vector<Tensor> by_node_;
};

// Define-by-run record of a computation. Nodes are appended in execution
// order, so inputs always precede their consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);

  // Evaluates `op` on `inputs`, checks the result is finite and records it.
  Var forward(OpKind op, std::span<const Var> inputs, OpAttrs attrs = {});
  Var forward(OpKind op, std::initializer_list<Var> inputs, OpAttrs attrs = {}) {
    return forward(op, std::span<const Var>(inputs.begin(), inputs.size()), std::move(attrs));
  }

  // Reverse sweep from a scalar node. Every node is visited at most once, in
  // reverse recording order.
  Gradients backward(Var loss) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor value;
  };

  void check_owner(Var v) const;

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax(Var a);
Var log_softmax(Var a);
Var log(Var a);
Var log_sigmoid(Var a);
Var sum(Var a);
Var row_sum(Var a);
Var gather_rows(Var a, std::vector<std::size_t> indices);

}  // namespace phasecast::diff
