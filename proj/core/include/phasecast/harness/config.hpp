#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phasecast/metrics/metrics.hpp"
#include "phasecast/seq/config.hpp"
#include "phasecast/train/losses.hpp"
#include "phasecast/train/trainer.hpp"

namespace phasecast::harness {

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "files"
  // synthetic
  std::string graph = "cholec7";  // built-in name or graph file path
  std::size_t n_videos = 200;
  double noise_sigma = 0.3;
  std::size_t feature_dim = 16;
  // files
  std::filesystem::path annotations;
  std::filesystem::path features;
  std::vector<std::string> phase_names;

  double train_fraction = 0.75;
};

struct MetricOptions {
  double delta = 15.0;
  metrics::LdMode ld_mode = metrics::LdMode::kAllSamplesMean;
  std::size_t eval_stride = 5;
};

struct Horizon {
  std::size_t t_past = 15;
  std::size_t t_future = 15;
  friend bool operator==(const Horizon&, const Horizon&) = default;
};

// JSON experiment file, schema version 1. Every key is optional and falls back
// to the defaults below; unknown keys are errors.
//   {
//     "schema_version": 1,
//     "seed": 42,
//     "out_dir": "runs/default",
//     "data": {"source": "synthetic", "graph": "cholec7", "n_videos": 200, "noise_sigma": 0.3,
//              "feature_dim": 16, "train_fraction": 0.75,
//              "annotations": "a.csv", "features": "f.csv", "phase_names": ["...", ...]},
//     "model": {"hidden": 32, "noise_dim": 8, "t_past": 15, "t_future": 15, "gumbel_tau": 1.0},
//     "train": {"n_samples": 10, "pretrain_epochs": 20, "gan_epochs": 2000, "epoch_size": 64,
//               "batch_size": 8, "lr": 1e-4, "checkpoint_every": 100, "validate_every": 25,
//               "hmm_iterations": 50},
//     "weights": {"dis": 0.6, "rec": 0.2, "past": 0.2},
//     "metrics": {"delta": 15, "ld_mode": "all-samples-mean", "eval_stride": 5},
//     "horizons": [[15, 10], [15, 45], [5, 15], [15, 15]],
//     "plots": 3
//   }
// Relative paths inside the file resolve against the file's directory.
// model.n_phases and model.feature_dim come from the data.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "runs/default";
  DataConfig data;
  seq::ModelConfig model;
  train::TrainConfig train;
  std::size_t hmm_iterations = 50;
  train::LossWeights weights;
  MetricOptions metrics;
  std::vector<Horizon> horizons{{15, 10}, {15, 45}, {5, 15}, {15, 15}};
  std::size_t plots = 3;

  // Every problem found, empty when the config is usable. Checks referenced
  // files exist but does not read them.
  std::vector<std::string> violations() const;
  // Throws ValidationError listing all violations.
  void validate() const;
};

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace phasecast::harness
