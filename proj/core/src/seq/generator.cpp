#include "phasecast/seq/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::seq {

using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

constexpr std::size_t kPredictChunk = 16;
constexpr std::size_t kEncodeChunk = 256;

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double k, Rng& rng) {
  std::uniform_real_distribution<double> u(-k, k);
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void expect_shape(const Tensor& t, std::size_t rows, std::size_t cols, std::string_view name) {
  if (t.rank() != 2 || t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(name) + ": expected [" + std::to_string(rows) + " x " + std::to_string(cols) +
                     "], got " + diff::shape_str(t.shape()));
  }
  if (!t.all_finite()) throw NonFiniteError(std::string(name) + " contains non-finite values");
}

}  // namespace

GeneratorParams GeneratorParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  GeneratorParams p;
  p.encoder = LstmWeights::init(cfg.feature_dim, cfg.hidden, rng);
  p.decoder = LstmWeights::init(cfg.n_phases, cfg.hidden, rng);
  const double kh = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  p.head_W = uniform_tensor(cfg.hidden, cfg.n_phases, kh, rng);
  p.head_b = uniform_tensor(1, cfg.n_phases, kh, rng);
  const double ki = 1.0 / std::sqrt(static_cast<double>(cfg.hidden + cfg.noise_dim));
  p.init_W = uniform_tensor(cfg.hidden + cfg.noise_dim, cfg.hidden, ki, rng);
  p.init_b = uniform_tensor(1, cfg.hidden, ki, rng);
  return p;
}

GeneratorParams GeneratorParams::zeros(const ModelConfig& cfg) {
  GeneratorParams p;
  p.encoder = LstmWeights::zeros(cfg.feature_dim, cfg.hidden);
  p.decoder = LstmWeights::zeros(cfg.n_phases, cfg.hidden);
  p.head_W = Tensor::zeros(cfg.hidden, cfg.n_phases);
  p.head_b = Tensor::zeros(1, cfg.n_phases);
  p.init_W = Tensor::zeros(cfg.hidden + cfg.noise_dim, cfg.hidden);
  p.init_b = Tensor::zeros(1, cfg.hidden);
  return p;
}

void GeneratorParams::validate(const ModelConfig& cfg) const {
  const std::size_t h = cfg.hidden;
  expect_shape(encoder.W, cfg.feature_dim + h, 4 * h, "generator.encoder.W");
  expect_shape(encoder.b, 1, 4 * h, "generator.encoder.b");
  expect_shape(decoder.W, cfg.n_phases + h, 4 * h, "generator.decoder.W");
  expect_shape(decoder.b, 1, 4 * h, "generator.decoder.b");
  expect_shape(head_W, h, cfg.n_phases, "generator.head.W");
  expect_shape(head_b, 1, cfg.n_phases, "generator.head.b");
  expect_shape(init_W, h + cfg.noise_dim, h, "generator.init.W");
  expect_shape(init_b, 1, h, "generator.init.b");
}

std::vector<Tensor*> GeneratorParams::tensors() {
  std::vector<Tensor*> out;
  visit([&out](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Var> GeneratorVars::list() const {
  return {encoder.W, encoder.b, decoder.W, decoder.b, head_W, head_b, init_W, init_b};
}

GeneratorVars bind(Tape& tape, const GeneratorParams& p, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  GeneratorVars g;
  g.encoder = bind(tape, p.encoder, trainable);
  g.decoder = bind(tape, p.decoder, trainable);
  g.head_W = put(p.head_W);
  g.head_b = put(p.head_b);
  g.init_W = put(p.init_W);
  g.init_b = put(p.init_b);
  return g;
}

Var phase_head(const GeneratorVars& g, Var h) { return diff::add(diff::matmul(h, g.head_W), g.head_b); }

EncoderOutput encode_past(const GeneratorVars& g, const ModelConfig& cfg, std::span<const Var> frames) {
  if (frames.size() != cfg.t_past) {
    throw ShapeError("encode_past: expected " + std::to_string(cfg.t_past) + " frames, got " +
                     std::to_string(frames.size()));
  }
  const std::size_t batch = frames.front().value().rows();
  EncoderOutput out;
  LstmState state = zero_state(frames.front().tape(), batch, cfg.hidden);
  for (const Var& x : frames) {
    if (x.value().cols() != cfg.feature_dim || x.value().rows() != batch) {
      throw ShapeError("encode_past: frame of shape " + diff::shape_str(x.value().shape()) + ", expected [" +
                       std::to_string(batch) + " x " + std::to_string(cfg.feature_dim) + "]");
    }
    state = lstm_cell(x, state, g.encoder);
    out.hidden.push_back(state.h);
    out.logits.push_back(phase_head(g, state.h));
  }
  out.last = state;
  return out;
}

Var init_decoder(const GeneratorVars& g, Var h_last, Var z) {
  return diff::tanh(diff::add(diff::matmul(diff::concat({h_last, z}), g.init_W), g.init_b));
}

Tensor draw_gumbel(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& v : t.values()) {
    double x = u(rng);
    while (x <= 0.0) x = u(rng);
    v = -std::log(-std::log(x));
  }
  return t;
}

GumbelSample gumbel_softmax(Var logits, double tau, const Tensor& noise) {
  if (!(tau > 0.0)) throw ValidationError("gumbel_softmax: tau must be > 0");
  if (!noise.same_shape(logits.value())) {
    throw ShapeError("gumbel_softmax: noise " + diff::shape_str(noise.shape()) + " vs logits " +
                     diff::shape_str(logits.value().shape()));
  }
  const Var perturbed = diff::add(logits, logits.tape().constant(noise));
  const Var soft = diff::softmax(diff::scale(perturbed, 1.0 / tau));
  return GumbelSample{soft, soft.value().argmax_rows()};
}

GumbelSample gumbel_softmax(Var logits, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw ValidationError("gumbel_softmax: tau must be > 0");
  return gumbel_softmax(logits, tau, draw_gumbel(logits.value().rows(), logits.value().cols(), rng));
}

DecoderOutput decode_future(const GeneratorVars& g, const ModelConfig& cfg, Var h0, Var first_input,
                            std::span<const Tensor> gumbel) {
  const std::size_t rows = h0.value().rows();
  if (h0.value().cols() != cfg.hidden) throw ShapeError("decode_future: h0 has wrong width");
  if (first_input.value().rows() != rows || first_input.value().cols() != cfg.n_phases) {
    throw ShapeError("decode_future: first input " + diff::shape_str(first_input.value().shape()));
  }
  DecoderOutput out;
  LstmState state{h0, h0.tape().constant(Tensor::zeros(rows, cfg.hidden))};
  Var input = first_input;
  for (const Tensor& noise : gumbel) {
    state = lstm_cell(input, state, g.decoder);
    const Var logits = phase_head(g, state.h);
    GumbelSample s = gumbel_softmax(logits, cfg.gumbel_tau, noise);
    out.logits.push_back(logits);
    out.soft.push_back(s.soft);
    out.hard.push_back(std::move(s.hard));
    input = s.soft;
  }
  return out;
}

GeneratorNoise draw_generator_noise(const ModelConfig& cfg, std::size_t rows, Rng& rng) {
  GeneratorNoise n;
  std::normal_distribution<double> normal(0.0, 1.0);
  n.z = Tensor::zeros(rows, cfg.noise_dim);
  for (auto& v : n.z.values()) v = normal(rng);
  n.gumbel.reserve(cfg.t_future);
  for (std::size_t t = 0; t < cfg.t_future; ++t) n.gumbel.push_back(draw_gumbel(rows, cfg.n_phases, rng));
  return n;
}

GeneratorOutput run_generator(const GeneratorVars& g, const ModelConfig& cfg, std::span<const Var> frames,
                              std::size_t n_samples, const GeneratorNoise& noise) {
  if (n_samples < 1) throw ValidationError("run_generator: n_samples must be >= 1");
  GeneratorOutput out;
  out.n_samples = n_samples;
  out.encoder = encode_past(g, cfg, frames);
  const std::size_t batch = frames.front().value().rows();
  const std::size_t rows = batch * n_samples;
  if (noise.z.rows() != rows || noise.z.cols() != cfg.noise_dim || noise.gumbel.size() != cfg.t_future) {
    throw ShapeError("run_generator: noise does not match " + std::to_string(rows) + " rows / t_future " +
                     std::to_string(cfg.t_future));
  }
  std::vector<std::size_t> expand(rows);
  for (std::size_t r = 0; r < rows; ++r) expand[r] = r / n_samples;

  Tape& tape = frames.front().tape();
  const Var h_last = diff::gather_rows(out.encoder.last.h, expand);
  const Var current = diff::gather_rows(diff::softmax(out.encoder.logits.back()), expand);
  const Var h0 = init_decoder(g, h_last, tape.constant(noise.z));
  out.decoder = decode_future(g, cfg, h0, current, noise.gumbel);
  return out;
}

std::vector<Tensor> time_major(std::span<const Tensor* const> windows) {
  if (windows.empty()) return {};
  const std::size_t steps = windows.front()->rows();
  const std::size_t dim = windows.front()->cols();
  std::vector<Tensor> out(steps, Tensor::zeros(windows.size(), dim));
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Tensor& w = *windows[b];
    if (w.rows() != steps || w.cols() != dim) {
      throw ShapeError("time_major: window " + std::to_string(b) + " has shape " + diff::shape_str(w.shape()));
    }
    for (std::size_t t = 0; t < steps; ++t) std::copy_n(w.data() + t * dim, dim, out[t].data() + b * dim);
  }
  return out;
}

Tensor one_hot(std::span<const int> labels, std::size_t n_phases) {
  Tensor t = Tensor::zeros(labels.size(), n_phases);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_phases) {
      throw ValidationError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(n_phases) + ")");
    }
    t(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

namespace {

std::vector<Var> frames_on(Tape& tape, std::span<const Tensor* const> windows, const ModelConfig& cfg) {
  for (const Tensor* w : windows) {
    if (w->rows() != cfg.t_past || w->cols() != cfg.feature_dim) {
      throw ShapeError("expected a " + std::to_string(cfg.t_past) + " x " + std::to_string(cfg.feature_dim) +
                       " feature window, got " + diff::shape_str(w->shape()));
    }
  }
  std::vector<Var> frames;
  for (Tensor& t : time_major(windows)) frames.push_back(tape.constant(std::move(t)));
  return frames;
}

Tensor rows_of(const Tensor& t, std::size_t begin, std::size_t count) {
  Tensor out = Tensor::zeros(count, t.cols());
  std::copy_n(t.data() + begin * t.cols(), count * t.cols(), out.data());
  return out;
}

}  // namespace

std::vector<PredictionSampleSet> predict(const GeneratorParams& params, const ModelConfig& cfg,
                                         std::span<const Tensor* const> windows, std::size_t n_samples, Rng& rng) {
  params.validate(cfg);
  std::vector<PredictionSampleSet> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += kPredictChunk) {
    const auto chunk = windows.subspan(start, std::min(kPredictChunk, windows.size() - start));
    Tape tape;
    const GeneratorVars g = bind(tape, params, false);
    const std::vector<Var> frames = frames_on(tape, chunk, cfg);
    const GeneratorNoise noise = draw_generator_noise(cfg, chunk.size() * n_samples, rng);
    const GeneratorOutput gen = run_generator(g, cfg, frames, n_samples, noise);

    for (std::size_t w = 0; w < chunk.size(); ++w) {
      PredictionSampleSet set;
      set.noise = rows_of(noise.z, w * n_samples, n_samples);
      set.past_logits = Tensor::zeros(cfg.t_past, cfg.n_phases);
      for (std::size_t t = 0; t < cfg.t_past; ++t) {
        const Tensor& l = gen.encoder.logits[t].value();
        std::copy_n(l.data() + w * cfg.n_phases, cfg.n_phases, set.past_logits.data() + t * cfg.n_phases);
      }
      for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t row = w * n_samples + s;
        std::vector<int> labels(cfg.t_future);
        Tensor logits = Tensor::zeros(cfg.t_future, cfg.n_phases);
        for (std::size_t t = 0; t < cfg.t_future; ++t) {
          labels[t] = gen.decoder.hard[t][row];
          const Tensor& l = gen.decoder.logits[t].value();
          std::copy_n(l.data() + row * cfg.n_phases, cfg.n_phases, logits.data() + t * cfg.n_phases);
        }
        set.samples.push_back(std::move(labels));
        set.logits.push_back(std::move(logits));
      }
      out.push_back(std::move(set));
    }
  }
  return out;
}

PredictionSampleSet predict_one(const GeneratorParams& params, const ModelConfig& cfg, const Tensor& window,
                                std::size_t n_samples, Rng& rng) {
  const Tensor* w = &window;
  return std::move(predict(params, cfg, std::span<const Tensor* const>(&w, 1), n_samples, rng).front());
}

std::vector<Tensor> encode_logits(const GeneratorParams& params, const ModelConfig& cfg,
                                  std::span<const Tensor* const> windows) {
  params.validate(cfg);
  std::vector<Tensor> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += kEncodeChunk) {
    const auto chunk = windows.subspan(start, std::min(kEncodeChunk, windows.size() - start));
    Tape tape;
    const GeneratorVars g = bind(tape, params, false);
    const std::vector<Var> frames = frames_on(tape, chunk, cfg);
    const EncoderOutput enc = encode_past(g, cfg, frames);
    for (std::size_t w = 0; w < chunk.size(); ++w) {
      Tensor l = Tensor::zeros(cfg.t_past, cfg.n_phases);
      for (std::size_t t = 0; t < cfg.t_past; ++t)
        std::copy_n(enc.logits[t].value().data() + w * cfg.n_phases, cfg.n_phases, l.data() + t * cfg.n_phases);
      out.push_back(std::move(l));
    }
  }
  return out;
}

}  // namespace phasecast::seq
