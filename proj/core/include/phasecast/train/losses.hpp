#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "phasecast/diff/tape.hpp"
#include "phasecast/seq/generator.hpp"

namespace phasecast::train {

struct LossWeights {
  double w_dis = 0.6;
  double w_rec = 0.2;
  double w_past = 0.2;

  void validate() const;
};

// Min over samples of the summed per-step cross-entropy between each
// sample's predicted distribution (softmax of its logits) and `gt`.
double variety_loss(const seq::PredictionSampleSet& samples, std::span<const int> gt);

// Summed per-step cross-entropy of the encoder's past logits (T x n_phases).
double past_encoding_loss(const diff::Tensor& past_logits, std::span<const int> gt);

struct GanLosses {
  double discriminator = 0.0;  // -ln d_real - mean ln(1 - d_fake)
  double generator = 0.0;      // -mean ln d_fake (non-saturating)
};

GanLosses gan_losses(double d_real, std::span<const double> d_fakes);

double total_loss(double l_dis, double l_rec, double l_past, const LossWeights& w);

// Tape forms, averaged over the B windows of a batch.

// Per-row cross-entropy of logits (R x N) against one-hot targets -> R x 1.
diff::Var cross_entropy_rows(diff::Var logits, diff::Var targets);

// decoder rows are window-major (w * n_samples + s); future[t] is B x N one-hot.
diff::Var variety_loss(const seq::DecoderOutput& decoder, std::size_t n_samples, std::span<const diff::Var> future);

diff::Var past_encoding_loss(const seq::EncoderOutput& encoder, std::span<const diff::Var> past);

// mean over windows of -ln sigmoid(fake_logit).
diff::Var generator_adversarial_loss(diff::Var fake_logit);

// mean over windows of -ln sigmoid(real) - ln(1 - sigmoid(fake)).
diff::Var discriminator_loss(diff::Var real_logit, diff::Var fake_logit);

}  // namespace phasecast::train
