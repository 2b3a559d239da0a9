#include "phasecast/diff/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::diff {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_mat(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(OpKind op, std::span<const Tensor* const> in, const std::string& why) {
  std::string msg = std::string(op_name(op)) + ": " + why + " (input shapes:";
  for (const Tensor* t : in) msg += " " + shape_str(t->shape());
  msg += ")";
  throw ShapeError(msg);
}

// Output shape of a binary elementwise op; b may be a 1 x N row broadcast
// over the rows of a.
bool broadcasts_row(const Tensor& a, const Tensor& b) {
  return !a.same_shape(b) && b.rows() == 1 && b.cols() == a.cols() && a.rows() > 1;
}

void check_binary(OpKind op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return;
  if (b.rows() == 1 && b.cols() == a.cols()) return;
  const Tensor* in[] = {&a, &b};
  shape_fail(op, in, "operands must match or the second must be a 1 x N row");
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out = a;
  if (a.same_shape(b)) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  } else {
    const std::size_t r = a.rows(), c = a.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out(i, j) = f(a(i, j), b[j]);
  }
  return out;
}

template <typename F>
Tensor unary(const Tensor& a, F f) {
  Tensor out = a;
  for (auto& v : out.values()) v = f(v);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  // log(sigmoid(x)) = -softplus(-x)
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Tensor softmax_rows(const Tensor& a, bool log_space) {
  Tensor out = a;
  const std::size_t r = a.rows(), c = a.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = a(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(a(i, j) - mx);
    if (log_space) {
      const double lz = std::log(z);
      for (std::size_t j = 0; j < c; ++j) out(i, j) = a(i, j) - mx - lz;
    } else {
      for (std::size_t j = 0; j < c; ++j) out(i, j) = std::exp(a(i, j) - mx) / z;
    }
  }
  return out;
}

// Accumulates `g` into slot, initialising it on first touch.
void accumulate(Tensor& slot, bool& has, const Tensor& g) {
  if (!has) {
    slot = g;
    has = true;
    return;
  }
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

// Reduces a gradient of a's shape onto b's shape when b was row-broadcast.
Tensor reduce_to(const Tensor& g, const Tensor& target) {
  if (g.same_shape(target)) return g;
  Tensor out = Tensor::zeros_like(target);
  const std::size_t r = g.rows(), c = g.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += g(i, j);
  return out;
}

}  // namespace

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kLog: return "log";
    case OpKind::kLogSigmoid: return "log_sigmoid";
    case OpKind::kSum: return "sum";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kGatherRows: return "gather_rows";
  }
  return "unknown";
}

void Tape::check_owner(Var v) const {
  if (&v.tape() != this || v.id() >= nodes_.size()) throw ShapeError("variable does not belong to this tape");
}

Var Tape::leaf(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("leaf value " + shape_str(value.shape()) + " is not finite");
  nodes_.push_back(Node{OpKind::kLeaf, {}, {}, std::move(value)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("constant value " + shape_str(value.shape()) + " is not finite");
  nodes_.push_back(Node{OpKind::kConstant, {}, {}, std::move(value)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::forward(OpKind op, std::span<const Var> inputs, OpAttrs attrs) {
  std::vector<const Tensor*> in;
  std::vector<std::size_t> ids;
  in.reserve(inputs.size());
  for (const Var& v : inputs) {
    check_owner(v);
    in.push_back(&nodes_[v.id()].value);
    ids.push_back(v.id());
  }
  auto arity = [&](std::size_t n) {
    if (in.size() != n) shape_fail(op, in, "expected " + std::to_string(n) + " inputs");
  };

  Tensor out;
  switch (op) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      throw ShapeError("use Tape::leaf / Tape::constant to record inputs");
    case OpKind::kMatMul: {
      arity(2);
      const Tensor &a = *in[0], &b = *in[1];
      if (a.cols() != b.rows()) shape_fail(op, in, "inner dimensions differ");
      out = Tensor::zeros(a.rows(), b.cols());
      as_mat(out).noalias() = as_mat(a) * as_mat(b);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      arity(2);
      check_binary(op, *in[0], *in[1]);
      if (op == OpKind::kAdd) out = binary(*in[0], *in[1], [](double x, double y) { return x + y; });
      if (op == OpKind::kSub) out = binary(*in[0], *in[1], [](double x, double y) { return x - y; });
      if (op == OpKind::kMul) out = binary(*in[0], *in[1], [](double x, double y) { return x * y; });
      break;
    }
    case OpKind::kScale: {
      arity(1);
      const double s = attrs.scalar;
      out = unary(*in[0], [s](double x) { return s * x; });
      break;
    }
    case OpKind::kConcat: {
      if (in.empty()) shape_fail(op, in, "needs at least one input");
      const std::size_t r = in[0]->rows();
      std::size_t c = 0;
      for (const Tensor* t : in) {
        if (t->rows() != r) shape_fail(op, in, "row counts differ");
        c += t->cols();
      }
      out = Tensor::zeros(r, c);
      std::size_t off = 0;
      for (const Tensor* t : in) {
        for (std::size_t i = 0; i < r; ++i)
          std::copy_n(t->data() + i * t->cols(), t->cols(), out.data() + i * c + off);
        off += t->cols();
      }
      break;
    }
    case OpKind::kSlice: {
      arity(1);
      const Tensor& a = *in[0];
      if (attrs.begin >= attrs.end || attrs.end > a.cols())
        shape_fail(op, in, "bad column range [" + std::to_string(attrs.begin) + ", " + std::to_string(attrs.end) + ")");
      const std::size_t w = attrs.end - attrs.begin;
      out = Tensor::zeros(a.rows(), w);
      for (std::size_t i = 0; i < a.rows(); ++i)
        std::copy_n(a.data() + i * a.cols() + attrs.begin, w, out.data() + i * w);
      break;
    }
    case OpKind::kSigmoid:
      arity(1);
      out = unary(*in[0], stable_sigmoid);
      break;
    case OpKind::kTanh:
      arity(1);
      out = unary(*in[0], [](double x) { return std::tanh(x); });
      break;
    case OpKind::kSoftmax:
      arity(1);
      out = softmax_rows(*in[0], false);
      break;
    case OpKind::kLogSoftmax:
      arity(1);
      out = softmax_rows(*in[0], true);
      break;
    case OpKind::kLog:
      arity(1);
      out = unary(*in[0], [](double x) { return std::log(x); });
      break;
    case OpKind::kLogSigmoid:
      arity(1);
      out = unary(*in[0], stable_log_sigmoid);
      break;
    case OpKind::kSum: {
      arity(1);
      double s = 0.0;
      for (double v : in[0]->values()) s += v;
      out = Tensor::scalar(s);
      break;
    }
    case OpKind::kRowSum: {
      arity(1);
      const Tensor& a = *in[0];
      out = Tensor::zeros(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j);
        out[i] = s;
      }
      break;
    }
    case OpKind::kGatherRows: {
      arity(1);
      const Tensor& a = *in[0];
      out = Tensor::zeros(attrs.indices.size(), a.cols());
      for (std::size_t i = 0; i < attrs.indices.size(); ++i) {
        if (attrs.indices[i] >= a.rows()) shape_fail(op, in, "row index out of range");
        std::copy_n(a.data() + attrs.indices[i] * a.cols(), a.cols(), out.data() + i * a.cols());
      }
      break;
    }
  }

  if (!out.all_finite()) {
    throw NonFiniteError(std::string(op_name(op)) + " produced a non-finite value (output shape " +
                         shape_str(out.shape()) + ")");
  }
  nodes_.push_back(Node{op, std::move(ids), std::move(attrs), std::move(out)});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  check_owner(loss);
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_str(lv.shape()));

  const std::size_t n = loss.id() + 1;
  std::vector<Tensor> grad(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  grad[loss.id()] = Tensor(lv.shape(), 1.0);
  has[loss.id()] = 1;

  auto push = [&](std::size_t id, const Tensor& g) {
    bool h = has[id];
    accumulate(grad[id], h, g);
    has[id] = h;
  };

  for (std::size_t k = n; k-- > 0;) {
    if (!has[k]) continue;
    const Node& node = nodes_[k];
    const Tensor& g = grad[k];
    const Tensor& y = node.value;
    if (!g.all_finite()) {
      throw NonFiniteError("backward: non-finite gradient at " + std::string(op_name(node.op)) + " node " +
                           std::to_string(k));
    }
    switch (node.op) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        Tensor ga = Tensor::zeros_like(a), gb = Tensor::zeros_like(b);
        as_mat(ga).noalias() = as_mat(g) * as_mat(b).transpose();
        as_mat(gb).noalias() = as_mat(a).transpose() * as_mat(g);
        push(node.inputs[0], ga);
        push(node.inputs[1], gb);
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const Tensor& b = nodes_[node.inputs[1]].value;
        push(node.inputs[0], g);
        Tensor gb = reduce_to(g, b);
        if (node.op == OpKind::kSub)
          for (auto& v : gb.values()) v = -v;
        push(node.inputs[1], gb);
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        const bool bc = broadcasts_row(a, b);
        Tensor ga = g, gfull = g;
        const std::size_t r = g.rows(), c = g.cols();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            const std::size_t bi = bc ? j : i * c + j;
            ga(i, j) = g(i, j) * b[bi];
            gfull(i, j) = g(i, j) * a(i, j);
          }
        push(node.inputs[0], ga);
        push(node.inputs[1], reduce_to(gfull, b));
        break;
      }
      case OpKind::kScale: {
        Tensor ga = g;
        for (auto& v : ga.values()) v *= node.attrs.scalar;
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        const std::size_t r = g.rows(), c = g.cols();
        for (std::size_t in : node.inputs) {
          const Tensor& part = nodes_[in].value;
          Tensor gp = Tensor::zeros_like(part);
          for (std::size_t i = 0; i < r; ++i)
            std::copy_n(g.data() + i * c + off, part.cols(), gp.data() + i * part.cols());
          off += part.cols();
          push(in, gp);
        }
        break;
      }
      case OpKind::kSlice: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        Tensor ga = Tensor::zeros_like(a);
        const std::size_t w = node.attrs.end - node.attrs.begin;
        for (std::size_t i = 0; i < a.rows(); ++i)
          std::copy_n(g.data() + i * w, w, ga.data() + i * a.cols() + node.attrs.begin);
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kSigmoid: {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i] * (1.0 - y[i]);
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kTanh: {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 1.0 - y[i] * y[i];
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kSoftmax: {
        Tensor ga = g;
        const std::size_t r = y.rows(), c = y.cols();
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < c; ++j) ga(i, j) = y(i, j) * (g(i, j) - dot);
        }
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kLogSoftmax: {
        Tensor ga = g;
        const std::size_t r = y.rows(), c = y.cols();
        for (std::size_t i = 0; i < r; ++i) {
          double gs = 0.0;
          for (std::size_t j = 0; j < c; ++j) gs += g(i, j);
          for (std::size_t j = 0; j < c; ++j) ga(i, j) = g(i, j) - std::exp(y(i, j)) * gs;
        }
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kLog: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= a[i];
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kLogSigmoid: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= stable_sigmoid(-a[i]);
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kSum: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        push(node.inputs[0], Tensor(a.shape(), g.item()));
        break;
      }
      case OpKind::kRowSum: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        Tensor ga = Tensor::zeros_like(a);
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) ga(i, j) = g[i];
        push(node.inputs[0], ga);
        break;
      }
      case OpKind::kGatherRows: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        Tensor ga = Tensor::zeros_like(a);
        const std::size_t c = a.cols();
        for (std::size_t i = 0; i < node.attrs.indices.size(); ++i) {
          const std::size_t src = node.attrs.indices[i];
          for (std::size_t j = 0; j < c; ++j) ga(src, j) += g(i, j);
        }
        push(node.inputs[0], ga);
        break;
      }
    }
  }

  // Only leaves are reported; everything else is dropped to zero-size.
  std::vector<Tensor> out(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].op != OpKind::kLeaf) continue;
    out[k] = has[k] ? std::move(grad[k]) : Tensor::zeros_like(nodes_[k].value);
  }
  return Gradients(std::move(out));
}

Var matmul(Var a, Var b) { return a.tape().forward(OpKind::kMatMul, {a, b}); }
Var add(Var a, Var b) { return a.tape().forward(OpKind::kAdd, {a, b}); }
Var sub(Var a, Var b) { return a.tape().forward(OpKind::kSub, {a, b}); }
Var mul(Var a, Var b) { return a.tape().forward(OpKind::kMul, {a, b}); }

Var scale(Var a, double s) {
  OpAttrs attrs;
  attrs.scalar = s;
  return a.tape().forward(OpKind::kScale, {a}, std::move(attrs));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: needs at least one input");
  return parts.front().tape().forward(OpKind::kConcat, parts);
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  OpAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return a.tape().forward(OpKind::kSlice, {a}, std::move(attrs));
}

Var sigmoid(Var a) { return a.tape().forward(OpKind::kSigmoid, {a}); }
Var tanh(Var a) { return a.tape().forward(OpKind::kTanh, {a}); }
Var softmax(Var a) { return a.tape().forward(OpKind::kSoftmax, {a}); }
Var log_softmax(Var a) { return a.tape().forward(OpKind::kLogSoftmax, {a}); }
Var log(Var a) { return a.tape().forward(OpKind::kLog, {a}); }
Var log_sigmoid(Var a) { return a.tape().forward(OpKind::kLogSigmoid, {a}); }
Var sum(Var a) { return a.tape().forward(OpKind::kSum, {a}); }
Var row_sum(Var a) { return a.tape().forward(OpKind::kRowSum, {a}); }

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  OpAttrs attrs;
  attrs.indices = std::move(indices);
  return a.tape().forward(OpKind::kGatherRows, {a}, std::move(attrs));
}

}  // namespace phasecast::diff
