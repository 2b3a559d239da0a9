#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasecast/baselines/hmm.hpp"
#include "phasecast/harness/config.hpp"
#include "phasecast/metrics/metrics.hpp"
#include "phasecast/random.hpp"
#include "phasecast/seq/generator.hpp"
#include "phasecast/synth/dataset.hpp"
#include "phasecast/synth/workflow.hpp"
#include "phasecast/train/trainer.hpp"

namespace phasecast::harness {

// Report column names, in report order.
inline constexpr const char* kConstantModel = "Constant Model";
inline constexpr const char* kHmmModel = "HMM";
inline constexpr const char* kGanNoDisModel = "GAN w/o Dis.";
inline constexpr const char* kGanModel = "GAN";

struct Dataset {
  std::vector<std::string> phase_names;
  std::optional<synth::WorkflowGraph> graph;  // synthetic data only
  std::size_t feature_dim = 0;
  std::vector<synth::VideoRecord> train;
  std::vector<synth::VideoRecord> test;

  std::size_t shortest_video() const;
};

Dataset build_dataset(const ExperimentConfig& cfg);
// annotations.csv, features.csv, split.json and (synthetic) graph.json.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

// cfg.model with n_phases and feature_dim taken from the data.
seq::ModelConfig model_config(const ExperimentConfig& cfg, const Dataset& data);
train::TrainConfig train_config(const ExperimentConfig& cfg);

struct PretrainResult {
  seq::GeneratorParams encoder;
  train::TrainLog log;
  double train_accuracy = 0.0;  // past phase accuracy on training windows
  double test_accuracy = 0.0;   // same on held-out videos
};

PretrainResult run_pretrain(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg);

train::GanResult run_gan(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                         const seq::GeneratorParams& pretrained, bool use_discriminator,
                         const std::filesystem::path& checkpoint_dir = {});

// Baum-Welch on the encoder's softmax outputs over the training videos.
// Each video contributes one sequence made of consecutive, non-overlapping
// t_past chunks.
baselines::BaumWelchResult fit_hmm(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                                   const seq::GeneratorParams& encoder);

struct TrainedModels {
  seq::GeneratorParams pretrained;
  std::optional<seq::GeneratorParams> gan_no_dis;
  seq::GeneratorParams gan;
  baselines::HmmParams hmm;
};

// Test-set windows: every eval_stride-th anchor plus one window anchored at
// each phase change, without duplicates, ordered by (video, t0).
std::vector<synth::Window> evaluation_windows(std::span<const synth::VideoRecord> videos, const seq::ModelConfig& mcfg,
                                              std::size_t stride);

struct Evaluation {
  std::vector<synth::Window> windows;
  std::vector<metrics::EvalCase> cases;
  std::vector<std::string> model_names;
  std::vector<std::vector<metrics::SampleSet>> predictions;  // per model, per window
  metrics::MetricsReport report;

  const std::vector<metrics::SampleSet>& of(const std::string& model) const;
};

Evaluation evaluate(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                    const TrainedModels& models);

struct RunOptions {
  bool write_outputs = true;
  bool train_ablation = true;
};

struct ExperimentResult {
  seq::ModelConfig model;
  PretrainResult pretrain;
  std::optional<train::GanResult> gan_no_dis;
  train::GanResult gan;
  baselines::BaumWelchResult hmm;
  Evaluation evaluation;
  std::vector<std::string> failures;
};

// Output layout under cfg.out_dir:
//   config.json, run.json
//   data/       dataset files
//   pretrain/   encoder.ckpt, train_log.tsv
//   gan/, gan_nodis/  checkpoints (best, every checkpoint_every epochs), train_log.tsv
//   hmm/        hmm.txt
//   report/     accuracy.csv, ld.csv, summary.json
//   plots/      timeline_*.svg
// Training divergence does not abort the run; it is listed in failures.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

struct SweepRow {
  Horizon horizon;
  bool valid = true;
  std::string note;
  std::vector<double> normalized_ld;  // per model in SweepTable::models order
};

struct SweepTable {
  std::vector<std::string> models;
  std::vector<SweepRow> rows;

  // t_past,t_future,status,<model>...
  void write_csv(std::ostream& os) const;
};

// One full train + evaluate per configured horizon, in configured order. A
// horizon longer than the shortest video yields an invalid row.
SweepTable sweep_horizons(const ExperimentConfig& cfg, const RunOptions& options = {});

// SVG timeline: time axis -t_past..+t_future seconds, ground-truth band over
// the whole window, up to 3 samples drawn at random from `samples` as bars
// over the future, and a marker at the current time.
void emit_timeline(const synth::Window& window, const metrics::SampleSet& samples,
                   std::span<const std::string> phase_names, Rng& rng, const std::filesystem::path& path,
                   const std::string& title = {});

// Writes a machine-readable run status (also used for CLI error records).
void write_status(const std::filesystem::path& path, const std::string& status,
                  std::span<const std::string> failures);

}  // namespace phasecast::harness
