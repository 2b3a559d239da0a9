#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "phasecast/diff/tape.hpp"
#include "phasecast/random.hpp"
#include "phasecast/seq/config.hpp"
#include "phasecast/seq/lstm.hpp"

namespace phasecast::seq {

// Encoder LSTM over observed features, a phase head shared by encoder and
// decoder, the map from (last encoder state, noise) to the decoder's initial
// hidden state, and the decoder LSTM fed by its own relaxed phase samples.
struct GeneratorParams {
  LstmWeights encoder;   // feature_dim -> hidden
  LstmWeights decoder;   // n_phases -> hidden
  diff::Tensor head_W;   // hidden x n_phases
  diff::Tensor head_b;   // 1 x n_phases
  diff::Tensor init_W;   // (hidden + noise_dim) x hidden
  diff::Tensor init_b;   // 1 x hidden

  static GeneratorParams init(const ModelConfig& cfg, Rng& rng);
  static GeneratorParams zeros(const ModelConfig& cfg);

  // Throws ShapeError / NonFiniteError on the first inconsistent tensor.
  void validate(const ModelConfig& cfg) const;

  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }

  std::vector<diff::Tensor*> tensors();

  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f(std::string_view("generator.encoder.W"), self.encoder.W);
    f(std::string_view("generator.encoder.b"), self.encoder.b);
    f(std::string_view("generator.decoder.W"), self.decoder.W);
    f(std::string_view("generator.decoder.b"), self.decoder.b);
    f(std::string_view("generator.head.W"), self.head_W);
    f(std::string_view("generator.head.b"), self.head_b);
    f(std::string_view("generator.init.W"), self.init_W);
    f(std::string_view("generator.init.b"), self.init_b);
  }
};

struct GeneratorVars {
  LstmVars encoder;
  LstmVars decoder;
  diff::Var head_W, head_b, init_W, init_b;

  // Same order as GeneratorParams::visit.
  std::vector<diff::Var> list() const;
};

GeneratorVars bind(diff::Tape& tape, const GeneratorParams& params, bool trainable);

// h is B x hidden; returns B x n_phases logits.
diff::Var phase_head(const GeneratorVars& g, diff::Var h);

struct EncoderOutput {
  std::vector<diff::Var> hidden;  // t_past entries, each B x hidden
  std::vector<diff::Var> logits;  // t_past entries, each B x n_phases
  LstmState last;
};

// frames: t_past entries, each B x feature_dim.
EncoderOutput encode_past(const GeneratorVars& g, const ModelConfig& cfg, std::span<const diff::Var> frames);

// Maps [h_last, z] to the decoder's initial hidden state through a tanh layer.
diff::Var init_decoder(const GeneratorVars& g, diff::Var h_last, diff::Var z);

struct GumbelSample {
  diff::Var soft;         // rows on the simplex
  std::vector<int> hard;  // argmax of each soft row
};

// Standard Gumbel(0, 1) noise of the given shape.
diff::Tensor draw_gumbel(std::size_t rows, std::size_t cols, Rng& rng);

// softmax((logits + noise) / tau), differentiable in logits.
GumbelSample gumbel_softmax(diff::Var logits, double tau, const diff::Tensor& noise);
GumbelSample gumbel_softmax(diff::Var logits, double tau, Rng& rng);

struct DecoderOutput {
  std::vector<diff::Var> logits;          // t_future entries, each R x n_phases
  std::vector<diff::Var> soft;            // relaxed samples, same shapes
  std::vector<std::vector<int>> hard;     // t_future x R labels
};

// Autoregressive roll-out. `first_input` seeds the step after t0; each later
// step is fed the previous step's soft sample. One roll-out step per noise
// tensor in `gumbel`.
DecoderOutput decode_future(const GeneratorVars& g, const ModelConfig& cfg, diff::Var h0, diff::Var first_input,
                            std::span<const diff::Tensor> gumbel);

// All noise one generator pass consumes, fixed up front so a pass is a
// deterministic function of (params, inputs, noise).
struct GeneratorNoise {
  diff::Tensor z;                     // rows x noise_dim
  std::vector<diff::Tensor> gumbel;   // t_future entries of rows x n_phases
};

GeneratorNoise draw_generator_noise(const ModelConfig& cfg, std::size_t rows, Rng& rng);

struct GeneratorOutput {
  EncoderOutput encoder;   // B rows
  DecoderOutput decoder;   // B * n_samples rows, window-major: row = w * n_samples + s
  std::size_t n_samples = 0;
};

GeneratorOutput run_generator(const GeneratorVars& g, const ModelConfig& cfg, std::span<const diff::Var> frames,
                              std::size_t n_samples, const GeneratorNoise& noise);

struct PredictionSampleSet {
  std::vector<std::vector<int>> samples;  // n_samples x t_future one-hot indices
  std::vector<diff::Tensor> logits;       // per sample, t_future x n_phases
  diff::Tensor noise;                     // n_samples x noise_dim
  diff::Tensor past_logits;               // t_past x n_phases encoder estimates

  std::size_t size() const { return samples.size(); }
};

// Batched inference. Each entry of `windows` is a t_past x feature_dim matrix.
std::vector<PredictionSampleSet> predict(const GeneratorParams& params, const ModelConfig& cfg,
                                         std::span<const diff::Tensor* const> windows, std::size_t n_samples,
                                         Rng& rng);

PredictionSampleSet predict_one(const GeneratorParams& params, const ModelConfig& cfg, const diff::Tensor& window,
                                std::size_t n_samples, Rng& rng);

// Encoder-only inference: t_past x n_phases logits per window.
std::vector<diff::Tensor> encode_logits(const GeneratorParams& params, const ModelConfig& cfg,
                                        std::span<const diff::Tensor* const> windows);

// Rearranges per-window T x D matrices into T time-major B x D matrices.
std::vector<diff::Tensor> time_major(std::span<const diff::Tensor* const> windows);

// One-hot rows for labels (T x n_phases).
diff::Tensor one_hot(std::span<const int> labels, std::size_t n_phases);

}  // namespace phasecast::seq
