#include "phasecast/seq/discriminator.hpp"

#include <cmath>
#include <string>

#include "phasecast/error.hpp"
#include "phasecast/seq/generator.hpp"

namespace phasecast::seq {

using diff::Tape;
using diff::Tensor;
using diff::Var;

DiscriminatorParams DiscriminatorParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  DiscriminatorParams p;
  p.past = LstmWeights::init(cfg.n_phases, cfg.hidden, rng);
  p.future = LstmWeights::init(cfg.n_phases, cfg.hidden, rng);
  const double k = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  std::uniform_real_distribution<double> u(-k, k);
  p.head_W = Tensor::zeros(cfg.hidden, 1);
  for (auto& v : p.head_W.values()) v = u(rng);
  p.head_b = Tensor::zeros(1, 1);
  p.head_b[0] = u(rng);
  return p;
}

DiscriminatorParams DiscriminatorParams::zeros(const ModelConfig& cfg) {
  DiscriminatorParams p;
  p.past = LstmWeights::zeros(cfg.n_phases, cfg.hidden);
  p.future = LstmWeights::zeros(cfg.n_phases, cfg.hidden);
  p.head_W = Tensor::zeros(cfg.hidden, 1);
  p.head_b = Tensor::zeros(1, 1);
  return p;
}

void DiscriminatorParams::validate(const ModelConfig& cfg) const {
  const std::size_t h = cfg.hidden;
  auto check = [](const Tensor& t, std::size_t r, std::size_t c, const char* name) {
    if (t.rank() != 2 || t.rows() != r || t.cols() != c) {
      throw ShapeError(std::string(name) + ": expected [" + std::to_string(r) + " x " + std::to_string(c) +
                       "], got " + diff::shape_str(t.shape()));
    }
    if (!t.all_finite()) throw NonFiniteError(std::string(name) + " contains non-finite values");
  };
  check(past.W, cfg.n_phases + h, 4 * h, "discriminator.past.W");
  check(past.b, 1, 4 * h, "discriminator.past.b");
  check(future.W, cfg.n_phases + h, 4 * h, "discriminator.future.W");
  check(future.b, 1, 4 * h, "discriminator.future.b");
  check(head_W, h, 1, "discriminator.head.W");
  check(head_b, 1, 1, "discriminator.head.b");
}

std::vector<Tensor*> DiscriminatorParams::tensors() {
  std::vector<Tensor*> out;
  visit([&out](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Var> DiscriminatorVars::list() const {
  return {past.W, past.b, future.W, future.b, head_W, head_b};
}

DiscriminatorVars bind(Tape& tape, const DiscriminatorParams& p, bool trainable) {
  DiscriminatorVars d;
  d.past = bind(tape, p.past, trainable);
  d.future = bind(tape, p.future, trainable);
  d.head_W = trainable ? tape.leaf(p.head_W) : tape.constant(p.head_W);
  d.head_b = trainable ? tape.leaf(p.head_b) : tape.constant(p.head_b);
  return d;
}

Var discriminator_logit(const DiscriminatorVars& d, std::span<const Var> past, std::span<const Var> future) {
  if (past.empty() || future.empty()) throw ShapeError("discriminate: past and future must be non-empty");
  const std::size_t batch = past.front().value().rows();
  const std::size_t width = d.past.W.value().rows() - d.past.b.value().cols() / 4;
  for (const auto* seq : {&past, &future}) {
    for (const Var& v : *seq) {
      if (v.value().rows() != batch || v.value().cols() != width) {
        throw ShapeError("discriminate: label step of shape " + diff::shape_str(v.value().shape()) +
                         ", expected [" + std::to_string(batch) + " x " + std::to_string(width) + "]");
      }
    }
  }
  LstmState state = zero_state(past.front().tape(), batch, d.past.b.value().cols() / 4);
  for (const Var& y : past) state = lstm_cell(y, state, d.past);
  for (const Var& y : future) state = lstm_cell(y, state, d.future);
  return diff::add(diff::matmul(state.h, d.head_W), d.head_b);
}

Var discriminate(const DiscriminatorVars& d, std::span<const Var> past, std::span<const Var> future) {
  return diff::sigmoid(discriminator_logit(d, past, future));
}

double discriminate(const DiscriminatorParams& params, const ModelConfig& cfg, const Tensor& past,
                    const Tensor& future) {
  params.validate(cfg);
  if (past.rows() != cfg.t_past || past.cols() != cfg.n_phases || future.rows() != cfg.t_future ||
      future.cols() != cfg.n_phases) {
    throw ShapeError("discriminate: past " + diff::shape_str(past.shape()) + " / future " +
                     diff::shape_str(future.shape()) + " do not match the model config");
  }
  Tape tape;
  const DiscriminatorVars d = bind(tape, params, false);
  const Tensor* p = &past;
  const Tensor* f = &future;
  std::vector<Var> pv, fv;
  for (Tensor& t : time_major(std::span<const Tensor* const>(&p, 1))) pv.push_back(tape.constant(std::move(t)));
  for (Tensor& t : time_major(std::span<const Tensor* const>(&f, 1))) fv.push_back(tape.constant(std::move(t)));
  return discriminate(d, pv, fv).value().item();
}

}  // namespace phasecast::seq
