#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasecast/seq/discriminator.hpp"
#include "phasecast/seq/generator.hpp"
#include "phasecast/synth/dataset.hpp"
#include "phasecast/train/losses.hpp"

namespace phasecast::train {

struct TrainConfig {
  std::size_t n_samples = 10;
  std::size_t pretrain_epochs = 20;
  std::size_t gan_epochs = 2000;
  std::size_t epoch_size = 64;  // windows drawn per adversarial epoch
  std::size_t batch_size = 8;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 100;
  std::size_t validate_every = 25;

  void validate() const;
};

struct EpochRecord {
  std::string stage;  // "pretrain" or "gan"
  std::size_t epoch = 0;
  double generator_loss = 0.0;
  double discriminator_loss = 0.0;
  double variety_loss = 0.0;
  double past_loss = 0.0;
  double wall_ms = 0.0;
};

// Tab-separated log, one record per epoch:
//   # phasecast-trainlog 1
//   stage  epoch  generator_loss  discriminator_loss  variety_loss  past_loss  wall_ms
//   ...
//   # checkpoint <path>          (one line per checkpoint written)
//   # failure <message>          (when training aborted)
struct TrainLog {
  std::vector<EpochRecord> records;
  std::vector<std::string> checkpoints;
  std::optional<std::string> failure;

  void write(std::ostream& os, bool include_wall_clock = true) const;
  void save(const std::filesystem::path& path) const;
};

// Time-major batch tensors built from windows.
struct Batch {
  std::vector<diff::Tensor> features;  // t_past x [B x feature_dim]
  std::vector<diff::Tensor> past;      // t_past x [B x n_phases] one-hot
  std::vector<diff::Tensor> future;    // t_future x [B x n_phases] one-hot
  std::size_t size = 0;
};

Batch make_batch(std::span<const synth::Window* const> windows, const seq::ModelConfig& cfg);

struct BatchVars {
  std::vector<diff::Var> features, past, future;
};

BatchVars bind(diff::Tape& tape, const Batch& batch);

struct GeneratorObjective {
  diff::Var total;
  diff::Var adversarial;  // invalid when no discriminator is supplied
  diff::Var variety;
  diff::Var past;
};

// Generator objective on one batch at fixed noise. With `disc == nullptr` the
// adversarial term is absent and total = w_rec * L_rec + w_past * L_past.
// Otherwise the adversarial term scores the first sample of each window.
GeneratorObjective generator_objective(const seq::GeneratorVars& gen, const seq::DiscriminatorVars* disc,
                                       const seq::ModelConfig& cfg, const BatchVars& batch, std::size_t n_samples,
                                       const seq::GeneratorNoise& noise, const LossWeights& w);

// Discriminator loss on one batch: real futures against one generated sample
// per window (noise drawn for batch-size rows).
diff::Var discriminator_objective(const seq::GeneratorVars& gen, const seq::DiscriminatorVars& disc,
                                  const seq::ModelConfig& cfg, const BatchVars& batch,
                                  const seq::GeneratorNoise& noise);

// Fraction of past steps whose encoder argmax equals the label.
double past_phase_accuracy(const seq::GeneratorParams& params, const seq::ModelConfig& cfg,
                           std::span<const synth::Window> windows);

// Supervised phase recognition on the encoder and phase head. One epoch is a
// shuffled pass over `windows`.
seq::GeneratorParams pretrain_encoder(std::span<const synth::Window> windows, seq::GeneratorParams params,
                                      const seq::ModelConfig& cfg, const TrainConfig& tcfg, TrainLog* log = nullptr);

struct GanOptions {
  bool use_discriminator = true;
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
  std::string checkpoint_prefix = "gan";
  std::span<const synth::Window> validation;  // drives best-checkpoint selection
};

struct GanResult {
  seq::GeneratorParams generator;
  seq::DiscriminatorParams discriminator;
  seq::GeneratorParams best_generator;  // lowest validation variety loss (final params without validation)
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  bool diverged = false;
  TrainLog log;
};

// Alternating adversarial training: per batch one discriminator step then one
// generator step. With use_discriminator off only the generator is updated,
// on w_rec * L_rec + w_past * L_past.
GanResult train_gan(std::span<const synth::Window> windows, seq::GeneratorParams generator,
                    const seq::ModelConfig& cfg, const TrainConfig& tcfg, const LossWeights& weights,
                    const GanOptions& options = {});

// Mean variety loss over windows using a fixed noise stream.
double mean_variety_loss(const seq::GeneratorParams& params, const seq::ModelConfig& cfg,
                         std::span<const synth::Window> windows, std::size_t n_samples, std::uint64_t seed);

}  // namespace phasecast::train
