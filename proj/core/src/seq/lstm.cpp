#include "phasecast/seq/lstm.hpp"

#include <cmath>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::seq {

using diff::Tensor;
using diff::Var;

LstmWeights LstmWeights::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-k, k);
  LstmWeights w = zeros(input_dim, hidden);
  for (auto& v : w.W.values()) v = u(rng);
  for (auto& v : w.b.values()) v = u(rng);
  return w;
}

LstmWeights LstmWeights::zeros(std::size_t input_dim, std::size_t hidden) {
  return LstmWeights{Tensor::zeros(input_dim + hidden, 4 * hidden), Tensor::zeros(1, 4 * hidden)};
}

LstmVars bind(diff::Tape& tape, const LstmWeights& w, bool trainable) {
  if (trainable) return LstmVars{tape.leaf(w.W), tape.leaf(w.b)};
  return LstmVars{tape.constant(w.W), tape.constant(w.b)};
}

LstmState lstm_cell(Var x, const LstmState& state, const LstmVars& w) {
  const std::size_t hidden = w.b.value().cols() / 4;
  const std::size_t in = x.value().cols();
  if (state.h.value().cols() != hidden || state.c.value().cols() != hidden ||
      in + hidden != w.W.value().rows()) {
    throw ShapeError("lstm_cell: input " + diff::shape_str(x.value().shape()) + ", hidden " +
                     diff::shape_str(state.h.value().shape()) + " do not fit weights " +
                     diff::shape_str(w.W.value().shape()));
  }
  const Var pre = diff::add(diff::matmul(diff::concat({x, state.h}), w.W), w.b);
  const Var i = diff::sigmoid(diff::slice_cols(pre, 0, hidden));
  const Var f = diff::sigmoid(diff::slice_cols(pre, hidden, 2 * hidden));
  const Var g = diff::tanh(diff::slice_cols(pre, 2 * hidden, 3 * hidden));
  const Var o = diff::sigmoid(diff::slice_cols(pre, 3 * hidden, 4 * hidden));
  const Var c = diff::add(diff::mul(f, state.c), diff::mul(i, g));
  const Var h = diff::mul(o, diff::tanh(c));
  return LstmState{h, c};
}

LstmState zero_state(diff::Tape& tape, std::size_t batch, std::size_t hidden) {
  return LstmState{tape.constant(Tensor::zeros(batch, hidden)), tape.constant(Tensor::zeros(batch, hidden))};
}

}  // namespace phasecast::seq
