#include "phasecast/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>

#include "phasecast/diff/adam.hpp"
#include "phasecast/error.hpp"
#include "phasecast/random.hpp"
#include "phasecast/seq/checkpoint.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using seq::ModelConfig;
using synth::Window;

namespace {

enum StreamTag : std::uint64_t {
  kPretrainShuffle = 1,
  kGanSampling = 2,
  kGanNoise = 3,
  kDiscriminatorInit = 4,
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<const Window*> pick(std::span<const Window> windows, std::span<const std::size_t> idx) {
  std::vector<const Window*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&windows[i]);
  return out;
}

std::vector<Tensor> grads_of(const diff::Gradients& g, std::span<const Var> leaves) {
  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const Var& v : leaves) out.push_back(g.of(v));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (n_samples < 1) throw ValidationError("train: n_samples must be >= 1");
  if (epoch_size < 1 || batch_size < 1) throw ValidationError("train: epoch_size and batch_size must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("train: lr must be > 0");
  if (checkpoint_every < 1 || validate_every < 1) throw ValidationError("train: checkpoint/validate cadence must be >= 1");
}

void TrainLog::write(std::ostream& os, bool include_wall_clock) const {
  os << "# phasecast-trainlog 1\n";
  os << "stage\tepoch\tgenerator_loss\tdiscriminator_loss\tvariety_loss\tpast_loss\twall_ms\n";
  for (const EpochRecord& r : records) {
    os << r.stage << '\t' << r.epoch << '\t' << format_double(r.generator_loss) << '\t'
       << format_double(r.discriminator_loss) << '\t' << format_double(r.variety_loss) << '\t'
       << format_double(r.past_loss) << '\t' << (include_wall_clock ? format_double(r.wall_ms) : "0") << '\n';
  }
  for (const std::string& c : checkpoints) os << "# checkpoint " << c << '\n';
  if (failure) os << "# failure " << *failure << '\n';
}

void TrainLog::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write train log " + path.string());
  write(os);
}

Batch make_batch(std::span<const Window* const> windows, const ModelConfig& cfg) {
  if (windows.empty()) throw ValidationError("make_batch: empty batch");
  Batch b;
  b.size = windows.size();
  std::vector<const Tensor*> feats;
  std::vector<Tensor> past, future;
  for (const Window* w : windows) {
    if (w->past_labels.size() != cfg.t_past || w->future_labels.size() != cfg.t_future) {
      throw ShapeError("make_batch: window lengths do not match the model config");
    }
    feats.push_back(&w->past_features);
    past.push_back(seq::one_hot(w->past_labels, cfg.n_phases));
    future.push_back(seq::one_hot(w->future_labels, cfg.n_phases));
  }
  std::vector<const Tensor*> pp, fp;
  for (const Tensor& t : past) pp.push_back(&t);
  for (const Tensor& t : future) fp.push_back(&t);
  b.features = seq::time_major(feats);
  b.past = seq::time_major(pp);
  b.future = seq::time_major(fp);
  return b;
}

BatchVars bind(Tape& tape, const Batch& batch) {
  BatchVars v;
  for (const Tensor& t : batch.features) v.features.push_back(tape.constant(t));
  for (const Tensor& t : batch.past) v.past.push_back(tape.constant(t));
  for (const Tensor& t : batch.future) v.future.push_back(tape.constant(t));
  return v;
}

namespace {

std::vector<Var> first_sample_rows(const seq::DecoderOutput& dec, std::size_t batch, std::size_t n_samples) {
  std::vector<std::size_t> idx(batch);
  for (std::size_t w = 0; w < batch; ++w) idx[w] = w * n_samples;
  std::vector<Var> out;
  for (const Var& s : dec.soft) out.push_back(n_samples == 1 ? s : diff::gather_rows(s, idx));
  return out;
}

}  // namespace

GeneratorObjective generator_objective(const seq::GeneratorVars& gen, const seq::DiscriminatorVars* disc,
                                       const ModelConfig& cfg, const BatchVars& batch, std::size_t n_samples,
                                       const seq::GeneratorNoise& noise, const LossWeights& w) {
  const seq::GeneratorOutput out = seq::run_generator(gen, cfg, batch.features, n_samples, noise);
  GeneratorObjective obj;
  obj.variety = variety_loss(out.decoder, n_samples, batch.future);
  obj.past = past_encoding_loss(out.encoder, batch.past);
  const Var data_terms = diff::add(diff::scale(obj.variety, w.w_rec), diff::scale(obj.past, w.w_past));
  if (disc == nullptr) {
    obj.total = data_terms;
    return obj;
  }
  const std::size_t b = batch.features.front().value().rows();
  const std::vector<Var> fake = first_sample_rows(out.decoder, b, n_samples);
  obj.adversarial = generator_adversarial_loss(seq::discriminator_logit(*disc, batch.past, fake));
  obj.total = diff::add(diff::scale(obj.adversarial, w.w_dis), data_terms);
  return obj;
}

Var discriminator_objective(const seq::GeneratorVars& gen, const seq::DiscriminatorVars& disc, const ModelConfig& cfg,
                            const BatchVars& batch, const seq::GeneratorNoise& noise) {
  const seq::GeneratorOutput out = seq::run_generator(gen, cfg, batch.features, 1, noise);
  const Var real = seq::discriminator_logit(disc, batch.past, batch.future);
  const Var fake = seq::discriminator_logit(disc, batch.past, out.decoder.soft);
  return discriminator_loss(real, fake);
}

double past_phase_accuracy(const seq::GeneratorParams& params, const ModelConfig& cfg, std::span<const Window> windows) {
  if (windows.empty()) throw ValidationError("past_phase_accuracy: no windows");
  std::vector<const Tensor*> feats;
  for (const Window& w : windows) feats.push_back(&w.past_features);
  const std::vector<Tensor> logits = seq::encode_logits(params, cfg, feats);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::vector<int> pred = logits[i].argmax_rows();
    for (std::size_t t = 0; t < pred.size(); ++t) hits += pred[t] == windows[i].past_labels[t];
    total += pred.size();
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

seq::GeneratorParams pretrain_encoder(std::span<const Window> windows, seq::GeneratorParams params,
                                      const ModelConfig& cfg, const TrainConfig& tcfg, TrainLog* log) {
  if (windows.empty()) throw ValidationError("pretrain_encoder: empty dataset");
  tcfg.validate();
  params.validate(cfg);
  std::vector<Tensor*> trained = {&params.encoder.W, &params.encoder.b, &params.head_W, &params.head_b};
  diff::AdamState adam = diff::AdamState::zeros_like(trained);
  Rng rng(derive_seed(tcfg.seed, kPretrainShuffle));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= tcfg.pretrain_epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t n = std::min(tcfg.batch_size, order.size() - start);
      const auto chosen = pick(windows, std::span<const std::size_t>(order).subspan(start, n));
      const Batch batch = make_batch(chosen, cfg);
      Tape tape;
      const seq::GeneratorVars g = seq::bind(tape, params, true);
      const BatchVars bv = bind(tape, batch);
      const seq::EncoderOutput enc = seq::encode_past(g, cfg, bv.features);
      const Var loss = past_encoding_loss(enc, bv.past);
      const diff::Gradients grads = tape.backward(loss);
      const Var leaves[] = {g.encoder.W, g.encoder.b, g.head_W, g.head_b};
      const std::vector<Tensor> gs = grads_of(grads, leaves);
      diff::adam_step(trained, gs, adam, tcfg.lr);
      loss_sum += loss.value().item();
      ++n_batches;
    }
    if (log) {
      EpochRecord r;
      r.stage = "pretrain";
      r.epoch = epoch;
      r.past_loss = loss_sum / static_cast<double>(n_batches);
      r.wall_ms = ms_since(t0);
      log->records.push_back(r);
    }
  }
  return params;
}

double mean_variety_loss(const seq::GeneratorParams& params, const ModelConfig& cfg, std::span<const Window> windows,
                         std::size_t n_samples, std::uint64_t seed) {
  if (windows.empty()) throw ValidationError("mean_variety_loss: no windows");
  std::vector<const Tensor*> feats;
  for (const Window& w : windows) feats.push_back(&w.past_features);
  Rng rng(seed);
  const auto sets = seq::predict(params, cfg, feats, n_samples, rng);
  double total = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) total += variety_loss(sets[i], windows[i].future_labels);
  return total / static_cast<double>(sets.size());
}

GanResult train_gan(std::span<const Window> windows, seq::GeneratorParams generator, const ModelConfig& cfg,
                    const TrainConfig& tcfg, const LossWeights& weights, const GanOptions& options) {
  if (windows.empty()) throw ValidationError("train_gan: empty dataset");
  tcfg.validate();
  weights.validate();
  generator.validate(cfg);

  GanResult res;
  Rng init_rng(derive_seed(tcfg.seed, kDiscriminatorInit));
  res.discriminator = seq::DiscriminatorParams::init(cfg, init_rng);
  res.generator = std::move(generator);
  res.best_generator = res.generator;

  std::vector<Tensor*> gen_tensors = res.generator.tensors();
  std::vector<Tensor*> disc_tensors = res.discriminator.tensors();
  diff::AdamState gen_adam = diff::AdamState::zeros_like(gen_tensors);
  diff::AdamState disc_adam = diff::AdamState::zeros_like(disc_tensors);

  Rng sample_rng(derive_seed(tcfg.seed, kGanSampling));
  Rng noise_rng(derive_seed(tcfg.seed, kGanNoise));
  std::uniform_int_distribution<std::size_t> pick_window(0, windows.size() - 1);
  const std::size_t batches_per_epoch = std::max<std::size_t>(1, tcfg.epoch_size / tcfg.batch_size);
  const std::uint64_t validation_seed = derive_seed(tcfg.seed, 0x7a1);

  seq::GeneratorParams last_good_gen = res.generator;
  seq::DiscriminatorParams last_good_disc = res.discriminator;

  auto save = [&](const std::string& tag, const seq::GeneratorParams& g) {
    if (options.checkpoint_dir.empty()) return;
    std::filesystem::create_directories(options.checkpoint_dir);
    const auto path = options.checkpoint_dir / (options.checkpoint_prefix + "_" + tag + ".ckpt");
    seq::Checkpoint ckpt{cfg, g, std::nullopt};
    if (options.use_discriminator) ckpt.discriminator = res.discriminator;
    seq::save_checkpoint(path, ckpt);
    res.log.checkpoints.push_back(path.string());
  };

  for (std::size_t epoch = 1; epoch <= tcfg.gan_epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord rec;
    rec.stage = "gan";
    rec.epoch = epoch;
    try {
      for (std::size_t b = 0; b < batches_per_epoch; ++b) {
        std::vector<std::size_t> idx(tcfg.batch_size);
        for (auto& i : idx) i = pick_window(sample_rng);
        const Batch batch = make_batch(pick(windows, idx), cfg);

        if (options.use_discriminator) {
          Tape tape;
          const seq::GeneratorVars g = seq::bind(tape, res.generator, false);
          const seq::DiscriminatorVars d = seq::bind(tape, res.discriminator, true);
          const BatchVars bv = bind(tape, batch);
          const seq::GeneratorNoise noise = seq::draw_generator_noise(cfg, batch.size, noise_rng);
          const Var loss = discriminator_objective(g, d, cfg, bv, noise);
          const std::vector<Tensor> gs = grads_of(tape.backward(loss), d.list());
          diff::adam_step(disc_tensors, gs, disc_adam, tcfg.lr);
          rec.discriminator_loss += loss.value().item();
        }

        Tape tape;
        const seq::GeneratorVars g = seq::bind(tape, res.generator, true);
        std::optional<seq::DiscriminatorVars> d;
        if (options.use_discriminator) d = seq::bind(tape, res.discriminator, false);
        const BatchVars bv = bind(tape, batch);
        const seq::GeneratorNoise noise = seq::draw_generator_noise(cfg, batch.size * tcfg.n_samples, noise_rng);
        const GeneratorObjective obj =
            generator_objective(g, d ? &*d : nullptr, cfg, bv, tcfg.n_samples, noise, weights);
        const std::vector<Tensor> gs = grads_of(tape.backward(obj.total), g.list());
        diff::adam_step(gen_tensors, gs, gen_adam, tcfg.lr);
        rec.generator_loss += obj.total.value().item();
        rec.variety_loss += obj.variety.value().item();
        rec.past_loss += obj.past.value().item();
      }
    } catch (const NonFiniteError& e) {
      res.generator = last_good_gen;
      res.discriminator = last_good_disc;
      res.diverged = true;
      res.log.failure = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    const double nb = static_cast<double>(batches_per_epoch);
    rec.generator_loss /= nb;
    rec.discriminator_loss /= nb;
    rec.variety_loss /= nb;
    rec.past_loss /= nb;

    const bool last = epoch == tcfg.gan_epochs;
    if (!options.validation.empty() && (epoch % tcfg.validate_every == 0 || last)) {
      const double v = mean_variety_loss(res.generator, cfg, options.validation, tcfg.n_samples, validation_seed);
      if (v < res.best_validation) {
        res.best_validation = v;
        res.best_epoch = epoch;
        res.best_generator = res.generator;
        save("best", res.generator);
      }
    }
    if (epoch % tcfg.checkpoint_every == 0 || last) {
      last_good_gen = res.generator;
      last_good_disc = res.discriminator;
      save("epoch" + std::to_string(epoch), res.generator);
    }
    rec.wall_ms = ms_since(t0);
    res.log.records.push_back(rec);
  }
  if (options.validation.empty()) {
    res.best_generator = res.generator;
    res.best_epoch = res.log.records.empty() ? 0 : res.log.records.back().epoch;
  }
  return res;
}

}  // namespace phasecast::train
