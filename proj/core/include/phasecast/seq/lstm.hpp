#pragma once

#include <cstddef>

#include "phasecast/diff/tape.hpp"
#include "phasecast/random.hpp"

namespace phasecast::seq {

// Single-layer LSTM cell. `W` maps [x, h] (input_dim + hidden) onto the four
// stacked gate pre-activations in the order input, forget, candidate, output.
struct LstmWeights {
  diff::Tensor W;
  diff::Tensor b;

  static LstmWeights init(std::size_t input_dim, std::size_t hidden, Rng& rng);
  static LstmWeights zeros(std::size_t input_dim, std::size_t hidden);
  std::size_t hidden() const { return b.cols() / 4; }
  std::size_t input_dim() const { return W.rows() - hidden(); }

  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

struct LstmVars {
  diff::Var W;
  diff::Var b;
};

struct LstmState {
  diff::Var h;
  diff::Var c;
};

LstmVars bind(diff::Tape& tape, const LstmWeights& w, bool trainable);

// x is B x input_dim, state is B x hidden.
LstmState lstm_cell(diff::Var x, const LstmState& state, const LstmVars& w);

LstmState zero_state(diff::Tape& tape, std::size_t batch, std::size_t hidden);

}  // namespace phasecast::seq
