#include "phasecast/train/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::train {

using diff::Tensor;
using diff::Var;

void LossWeights::validate() const {
  if (!(w_dis >= 0.0) || !(w_rec >= 0.0) || !(w_past >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
}

namespace {

double sequence_cross_entropy(const Tensor& logits, std::span<const int> gt) {
  if (logits.rows() != gt.size()) {
    throw ShapeError("cross-entropy: " + std::to_string(logits.rows()) + " logit rows vs " + std::to_string(gt.size()) +
                     " labels");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const auto row = logits.row_span(t);
    if (gt[t] < 0 || static_cast<std::size_t>(gt[t]) >= row.size()) throw ValidationError("cross-entropy: label out of range");
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += -(row[static_cast<std::size_t>(gt[t])] - mx - std::log(z));
  }
  return total;
}

}  // namespace

double variety_loss(const seq::PredictionSampleSet& samples, std::span<const int> gt) {
  if (samples.logits.empty()) throw ValidationError("variety_loss: empty sample set");
  double best = std::numeric_limits<double>::infinity();
  for (const Tensor& l : samples.logits) best = std::min(best, sequence_cross_entropy(l, gt));
  return best;
}

double past_encoding_loss(const Tensor& past_logits, std::span<const int> gt) {
  if (past_logits.rows() != gt.size()) throw ShapeError("past_encoding_loss: length mismatch");
  return sequence_cross_entropy(past_logits, gt);
}

GanLosses gan_losses(double d_real, std::span<const double> d_fakes) {
  auto in_range = [](double p) { return p > 0.0 && p < 1.0; };
  if (!in_range(d_real)) throw ValidationError("gan_losses: d_real must lie in (0, 1)");
  if (d_fakes.empty()) throw ValidationError("gan_losses: no fake scores");
  GanLosses out;
  double fake_term = 0.0, gen_term = 0.0;
  for (double f : d_fakes) {
    if (!in_range(f)) throw ValidationError("gan_losses: d_fake must lie in (0, 1)");
    fake_term += std::log1p(-f);
    gen_term += std::log(f);
  }
  const double n = static_cast<double>(d_fakes.size());
  out.discriminator = -std::log(d_real) - fake_term / n;
  out.generator = -gen_term / n;
  return out;
}

double total_loss(double l_dis, double l_rec, double l_past, const LossWeights& w) {
  return w.w_dis * l_dis + w.w_rec * l_rec + w.w_past * l_past;
}

Var cross_entropy_rows(Var logits, Var targets) {
  return diff::scale(diff::row_sum(diff::mul(targets, diff::log_softmax(logits))), -1.0);
}

Var variety_loss(const seq::DecoderOutput& decoder, std::size_t n_samples, std::span<const Var> future) {
  if (decoder.logits.size() != future.size() || future.empty()) {
    throw ShapeError("variety_loss: decoder produced " + std::to_string(decoder.logits.size()) + " steps, targets have " +
                     std::to_string(future.size()));
  }
  const std::size_t batch = future.front().value().rows();
  const std::size_t rows = batch * n_samples;
  std::vector<std::size_t> expand(rows);
  for (std::size_t r = 0; r < rows; ++r) expand[r] = r / n_samples;

  Var per_sample;
  for (std::size_t t = 0; t < future.size(); ++t) {
    const Var ce = cross_entropy_rows(decoder.logits[t], diff::gather_rows(future[t], expand));
    per_sample = t == 0 ? ce : diff::add(per_sample, ce);
  }
  // Select the best sample of each window; the selection itself carries no
  // gradient, matching the subgradient of the min.
  const Tensor& v = per_sample.value();
  Tensor mask = Tensor::zeros(rows, 1);
  for (std::size_t w = 0; w < batch; ++w) {
    std::size_t best = w * n_samples;
    for (std::size_t s = 1; s < n_samples; ++s)
      if (v[w * n_samples + s] < v[best]) best = w * n_samples + s;
    mask[best] = 1.0 / static_cast<double>(batch);
  }
  return diff::sum(diff::mul(per_sample, per_sample.tape().constant(std::move(mask))));
}

Var past_encoding_loss(const seq::EncoderOutput& encoder, std::span<const Var> past) {
  if (encoder.logits.size() != past.size() || past.empty()) throw ShapeError("past_encoding_loss: length mismatch");
  const double batch = static_cast<double>(past.front().value().rows());
  Var total;
  for (std::size_t t = 0; t < past.size(); ++t) {
    const Var ce = diff::sum(cross_entropy_rows(encoder.logits[t], past[t]));
    total = t == 0 ? ce : diff::add(total, ce);
  }
  return diff::scale(total, 1.0 / batch);
}

Var generator_adversarial_loss(Var fake_logit) {
  const double batch = static_cast<double>(fake_logit.value().rows());
  return diff::scale(diff::sum(diff::log_sigmoid(fake_logit)), -1.0 / batch);
}

Var discriminator_loss(Var real_logit, Var fake_logit) {
  const double batch = static_cast<double>(real_logit.value().rows());
  const Var real_term = diff::sum(diff::log_sigmoid(real_logit));
  const Var fake_term = diff::sum(diff::log_sigmoid(diff::scale(fake_logit, -1.0)));
  return diff::scale(diff::add(real_term, fake_term), -1.0 / batch);
}

}  // namespace phasecast::train
