#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "phasecast/diff/grad_check.hpp"
#include "phasecast/error.hpp"
#include "phasecast/seq/discriminator.hpp"
#include "phasecast/seq/generator.hpp"
#include "test_util.hpp"

namespace phasecast::seq {
namespace {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using testing::random_tensor;

ModelConfig tiny() {
  ModelConfig c;
  c.n_phases = 3;
  c.hidden = 4;
  c.feature_dim = 5;
  c.noise_dim = 2;
  c.t_past = 3;
  c.t_future = 3;
  return c;
}

std::vector<Var> constants(Tape& t, const std::vector<Tensor>& xs) {
  std::vector<Var> out;
  for (const auto& x : xs) out.push_back(t.constant(x));
  return out;
}

TEST(ModelConfig, ValidateRejectsZeroDims) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.hidden, 32u);
  c.noise_dim = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ModelConfig{};
  c.gumbel_tau = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Lstm, ZeroWeightsHalveTheCell) {
  // Every gate sits at sigmoid(0) = 1/2 and the candidate at tanh(0) = 0.
  Tape t;
  const LstmVars w = bind(t, LstmWeights::zeros(5, 4), false);
  Rng rng(1);
  const Tensor c0 = random_tensor(2, 4, rng);
  const LstmState s{t.constant(random_tensor(2, 4, rng)), t.constant(c0)};
  const LstmState out = lstm_cell(t.constant(random_tensor(2, 5, rng)), s, w);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_DOUBLE_EQ(out.c.value()[k], 0.5 * c0[k]);
    EXPECT_DOUBLE_EQ(out.h.value()[k], 0.5 * std::tanh(0.5 * c0[k]));
  }
  const LstmState from_zero = lstm_cell(t.constant(random_tensor(2, 5, rng)), zero_state(t, 2, 4), w);
  for (double v : from_zero.h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, HiddenIsBoundedByOne) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    LstmWeights lw = LstmWeights::init(6, 8, rng);
    lw.W = random_tensor(14, 32, rng, 3.0);
    const LstmVars w = bind(t, lw, false);
    const LstmState s{t.constant(random_tensor(3, 8, rng, 5.0)), t.constant(random_tensor(3, 8, rng, 5.0))};
    const LstmState out = lstm_cell(t.constant(random_tensor(3, 6, rng, 5.0)), s, w);
    for (double v : out.h.value().values()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Lstm, CellGradientMatchesFiniteDifferences) {
  Rng rng(3);
  const LstmWeights lw = LstmWeights::init(5, 4, rng);
  const std::vector<Tensor> xs{random_tensor(2, 5, rng), random_tensor(2, 4, rng), random_tensor(2, 4, rng), lw.W, lw.b};
  const auto r = diff::grad_check(
      [](Tape&, std::span<const Var> v) {
        const LstmState s = lstm_cell(v[0], LstmState{v[1], v[2]}, LstmVars{v[3], v[4]});
        return diff::add(diff::sum(diff::mul(s.h, s.h)), diff::sum(diff::tanh(s.c)));
      },
      xs, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Lstm, ShapeMismatchThrows) {
  Tape t;
  const LstmVars w = bind(t, LstmWeights::zeros(5, 4), false);
  const LstmState s = zero_state(t, 2, 4);
  EXPECT_THROW(lstm_cell(t.constant(Tensor::zeros(2, 6)), s, w), ShapeError);
}

TEST(Encoder, ShapesForDefaultConfig) {
  ModelConfig cfg;
  cfg.n_phases = 12;
  Rng rng(4);
  const GeneratorParams p = GeneratorParams::init(cfg, rng);
  Tape t;
  const GeneratorVars g = bind(t, p, false);
  std::vector<Tensor> frames;
  for (std::size_t i = 0; i < cfg.t_past; ++i) frames.push_back(random_tensor(2, cfg.feature_dim, rng));
  const auto vars = constants(t, frames);
  const EncoderOutput e = encode_past(g, cfg, vars);
  ASSERT_EQ(e.hidden.size(), 15u);
  ASSERT_EQ(e.logits.size(), 15u);
  EXPECT_EQ(e.hidden[0].value().cols(), 32u);
  EXPECT_EQ(e.logits[14].value().cols(), 12u);
  EXPECT_EQ(init_decoder(g, e.last.h, t.constant(Tensor::zeros(2, cfg.noise_dim))).value().cols(), 32u);
  EXPECT_THROW(encode_past(g, cfg, std::span<const Var>(vars).first(14)), ShapeError);
}

TEST(Encoder, ZeroRecurrenceAndConstantFramesGiveIdenticalLogits) {
  const ModelConfig cfg = tiny();
  Rng rng(5);
  GeneratorParams p = GeneratorParams::init(cfg, rng);
  for (std::size_t r = cfg.feature_dim; r < p.encoder.W.rows(); ++r)
    for (std::size_t c = 0; c < p.encoder.W.cols(); ++c) p.encoder.W(r, c) = 0.0;
  // Forget gate closed so the cell state cannot accumulate.
  for (std::size_t c = cfg.hidden; c < 2 * cfg.hidden; ++c) p.encoder.b[c] = -1e3;
  Tape t;
  const GeneratorVars g = bind(t, p, false);
  const Tensor frame = random_tensor(1, cfg.feature_dim, rng);
  const auto vars = constants(t, std::vector<Tensor>(cfg.t_past, frame));
  const EncoderOutput e = encode_past(g, cfg, vars);
  for (std::size_t i = 1; i < cfg.t_past; ++i) EXPECT_EQ(e.logits[i].value(), e.logits[0].value());
}

TEST(PhaseHead, ZeroWeightsUniformAndShiftInvariantArgmax) {
  ModelConfig cfg;
  cfg.n_phases = 12;
  const GeneratorParams p = GeneratorParams::zeros(cfg);
  Tape t;
  const GeneratorVars g = bind(t, p, false);
  Rng rng(6);
  const Var logits = phase_head(g, t.constant(random_tensor(1, 32, rng)));
  EXPECT_EQ(logits.value().cols(), 12u);
  for (double v : diff::softmax(logits).value().values()) EXPECT_DOUBLE_EQ(v, 1.0 / 12.0);

  const Tensor x = random_tensor(4, 7, rng);
  Tensor shifted = x;
  for (auto& v : shifted.values()) v += 123.0;
  EXPECT_EQ(x.argmax_rows(), shifted.argmax_rows());
}

TEST(InitDecoder, DeterministicAndNoiseSensitive) {
  const ModelConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GeneratorParams p = GeneratorParams::init(cfg, rng);
    Tape t;
    const GeneratorVars g = bind(t, p, false);
    const Var h = t.constant(random_tensor(1, cfg.hidden, rng));
    const Var z0 = t.constant(Tensor::zeros(1, cfg.noise_dim));
    EXPECT_EQ(init_decoder(g, h, z0).value(), init_decoder(g, h, z0).value());
    const Var za = t.constant(random_tensor(1, cfg.noise_dim, rng));
    const Var zb = t.constant(random_tensor(1, cfg.noise_dim, rng));
    EXPECT_NE(init_decoder(g, h, za).value(), init_decoder(g, h, zb).value());
  }
}

TEST(Gumbel, HardIsArgmaxOfSoft) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    const GumbelSample s = gumbel_softmax(t.constant(random_tensor(5, 6, rng, 2.0)), 0.5, rng);
    EXPECT_EQ(s.hard, s.soft.value().argmax_rows());
  }
}

TEST(Gumbel, LowTemperatureIsOneHot) {
  Rng rng(8);
  Tape t;
  const Tensor logits = Tensor::from_rows({{0.0, 4.0, -3.0}, {5.0, 0.0, 1.0}});
  const Tensor noise = draw_gumbel(2, 3, rng);
  const GumbelSample s = gumbel_softmax(t.constant(logits), 1e-4, noise);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(s.soft.value()(r, c), static_cast<int>(c) == s.hard[r] ? 1.0 : 0.0, 1e-6);
    }
  }
}

TEST(Gumbel, NonPositiveTemperatureRejected) {
  Rng rng(9);
  Tape t;
  EXPECT_THROW(gumbel_softmax(t.constant(Tensor::zeros(1, 3)), 0.0, rng), ValidationError);
  EXPECT_THROW(gumbel_softmax(t.constant(Tensor::zeros(1, 3)), -1.0, rng), ValidationError);
}

TEST(Gumbel, SoftGradientMatchesFiniteDifferences) {
  Rng rng(10);
  const Tensor noise = draw_gumbel(3, 4, rng);
  const Tensor w = random_tensor(3, 4, rng);
  const double err = diff::grad_check(
      [&](Tape& t, Var x) { return diff::sum(diff::mul(gumbel_softmax(x, 0.7, noise).soft, t.constant(w))); },
      random_tensor(3, 4, rng), 1e-6);
  EXPECT_LT(err, 1e-4);
}

TEST(Decoder, ShapesHardOneHotAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng cfg_rng(seed);
    ModelConfig cfg;
    cfg.n_phases = 2 + seed % 5;
    cfg.hidden = 3 + seed % 4;
    cfg.feature_dim = 2 + seed % 3;
    cfg.noise_dim = 1 + seed % 3;
    cfg.t_past = 1 + seed % 4;
    cfg.t_future = 1 + (seed * 7) % 6;
    const GeneratorParams p = GeneratorParams::init(cfg, cfg_rng);
    const Tensor window = random_tensor(cfg.t_past, cfg.feature_dim, cfg_rng);
    Rng a(seed + 100), b(seed + 100);
    const PredictionSampleSet sa = predict_one(p, cfg, window, 4, a);
    const PredictionSampleSet sb = predict_one(p, cfg, window, 4, b);
    ASSERT_EQ(sa.samples.size(), 4u);
    EXPECT_EQ(sa.samples, sb.samples);
    for (const auto& s : sa.samples) {
      ASSERT_EQ(s.size(), cfg.t_future);
      for (int l : s) EXPECT_TRUE(l >= 0 && static_cast<std::size_t>(l) < cfg.n_phases);
    }
    EXPECT_EQ(sa.past_logits.rows(), cfg.t_past);
  }
}

TEST(Decoder, SoftSamplesAreOnSimplexAndHardMatches) {
  const ModelConfig cfg = tiny();
  Rng rng(11);
  const GeneratorParams p = GeneratorParams::init(cfg, rng);
  Tape t;
  const GeneratorVars g = bind(t, p, false);
  std::vector<Tensor> frames;
  for (std::size_t i = 0; i < cfg.t_past; ++i) frames.push_back(random_tensor(2, cfg.feature_dim, rng));
  const GeneratorOutput out = run_generator(g, cfg, constants(t, frames), 3, draw_generator_noise(cfg, 6, rng));
  ASSERT_EQ(out.decoder.soft.size(), cfg.t_future);
  for (std::size_t k = 0; k < cfg.t_future; ++k) {
    const Tensor& s = out.decoder.soft[k].value();
    ASSERT_EQ(s.rows(), 6u);
    EXPECT_EQ(out.decoder.hard[k], s.argmax_rows());
    for (std::size_t r = 0; r < 6; ++r) {
      double sum = 0;
      for (std::size_t c = 0; c < cfg.n_phases; ++c) sum += s(r, c);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Discriminator, ZeroHeadGivesHalfAndRangeIsOpen) {
  const ModelConfig cfg = tiny();
  Rng rng(12);
  DiscriminatorParams d = DiscriminatorParams::init(cfg, rng);
  const Tensor past = one_hot(std::vector<int>{0, 1, 1}, 3), fut = one_hot(std::vector<int>{1, 2, 2}, 3);
  const double p = discriminate(d, cfg, past, fut);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
  d.head_W = Tensor::zeros(cfg.hidden, 1);
  d.head_b = Tensor::zeros(1, 1);
  EXPECT_DOUBLE_EQ(discriminate(d, cfg, past, fut), 0.5);
  EXPECT_THROW(discriminate(d, cfg, past, one_hot(std::vector<int>{1, 2}, 3)), ShapeError);
}

TEST(Discriminator, GradientWrtFutureMatchesFiniteDifferences) {
  const ModelConfig cfg = tiny();
  Rng rng(13);
  const DiscriminatorParams d = DiscriminatorParams::init(cfg, rng);
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < cfg.t_past + cfg.t_future; ++i) xs.push_back(random_tensor(2, cfg.n_phases, rng));
  const auto r = diff::grad_check(
      [&](Tape& t, std::span<const Var> v) {
        const DiscriminatorVars dv = bind(t, d, false);
        return diff::sum(discriminator_logit(dv, v.first(cfg.t_past), v.subspan(cfg.t_past)));
      },
      xs, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(EndToEnd, DiscriminatorScoreSendsGradientIntoGenerator) {
  const ModelConfig cfg = tiny();
  Rng rng(14);
  const GeneratorParams gp = GeneratorParams::init(cfg, rng);
  const DiscriminatorParams dp = DiscriminatorParams::init(cfg, rng);
  Tape t;
  const GeneratorVars g = bind(t, gp, true);
  const DiscriminatorVars d = bind(t, dp, false);
  std::vector<Tensor> frames, past;
  for (std::size_t i = 0; i < cfg.t_past; ++i) {
    frames.push_back(random_tensor(1, cfg.feature_dim, rng));
    past.push_back(one_hot(std::vector<int>{static_cast<int>(i % 3)}, 3));
  }
  const GeneratorOutput out = run_generator(g, cfg, constants(t, frames), 1, draw_generator_noise(cfg, 1, rng));
  const Var score = diff::sum(discriminate(d, constants(t, past), out.decoder.soft));
  const diff::Gradients grads = t.backward(score);
  for (const Var& v : {g.decoder.W, g.head_W, g.init_W, g.encoder.W}) {
    const Tensor& gr = grads.of(v);
    EXPECT_TRUE(gr.all_finite());
    double norm = 0;
    for (double x : gr.values()) norm += x * x;
    EXPECT_GT(norm, 0.0);
  }
}

TEST(Predict, BatchedMatchesSingleWindow) {
  const ModelConfig cfg = tiny();
  Rng rng(15);
  const GeneratorParams p = GeneratorParams::init(cfg, rng);
  std::vector<Tensor> windows;
  for (int i = 0; i < 3; ++i) windows.push_back(random_tensor(cfg.t_past, cfg.feature_dim, rng));
  std::vector<const Tensor*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  const std::vector<Tensor> logits = encode_logits(p, cfg, ptrs);
  for (std::size_t i = 0; i < 3; ++i) {
    Rng r(1);
    const PredictionSampleSet one = predict_one(p, cfg, windows[i], 2, r);
    for (std::size_t k = 0; k < logits[i].size(); ++k) EXPECT_NEAR(logits[i][k], one.past_logits[k], 1e-12);
  }
}

}  // namespace
}  // namespace phasecast::seq
