#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phasecast/diff/tensor.hpp"
#include "phasecast/synth/workflow.hpp"

namespace phasecast::synth {

// Annotation CSV: header `video_id,second,phase_id`, one row per second,
// sorted by (video_id, second) with seconds 0, 1, 2, ... per video. The
// phase column holds an integer id in [0, n_phases) or a phase name from
// `vocabulary`.
std::vector<PhaseSequence> load_annotations(const std::filesystem::path& path,
                                            std::span<const std::string> vocabulary);
void save_annotations(const std::filesystem::path& path, std::span<const PhaseSequence> seqs);

// Feature CSV: header `video_id,second,f0,...,f{D-1}`, same ordering rules.
std::map<std::string, diff::Tensor> load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, std::span<const std::string> video_ids,
                   std::span<const diff::Tensor> features);

struct VideoRecord {
  PhaseSequence sequence;
  diff::Tensor features;  // length x feature_dim
};

// One (past, future) training / evaluation unit. Past covers seconds
// t0 - t_past + 1 .. t0, future covers t0 + 1 .. t0 + t_future.
struct Window {
  diff::Tensor past_features;  // t_past x feature_dim
  std::vector<int> past_labels;
  std::vector<int> future_labels;
  std::string video_id;
  std::size_t t0 = 0;
};

std::size_t window_count(std::size_t length, std::size_t t_past, std::size_t t_future, std::size_t stride);

Window make_window(const VideoRecord& video, std::size_t t0, std::size_t t_past, std::size_t t_future);

// All windows at the given stride, video by video.
std::vector<Window> window_dataset(std::span<const VideoRecord> videos, std::size_t t_past, std::size_t t_future,
                                   std::size_t stride);

// One window per phase change, anchored so the change lands on the first
// future step (t0 = change second - 1). Changes too close to either end of
// a video are skipped.
std::vector<Window> transition_windows(std::span<const VideoRecord> videos, std::size_t t_past,
                                       std::size_t t_future);

struct Split {
  std::vector<VideoRecord> train;
  std::vector<VideoRecord> test;
};

// Shuffles by video id with `seed`, then assigns round(train_fraction * n)
// videos to train. Output order within each side follows the input order.
Split split_by_video(std::vector<VideoRecord> videos, double train_fraction, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_videos = 200;
  std::size_t feature_dim = 16;
  double noise_sigma = 0.3;
};

// Video ids are "vid0000", "vid0001", ...; each video draws from its own
// seed stream so generation is independent of order.
std::vector<VideoRecord> generate_videos(const WorkflowGraph& graph, const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace phasecast::synth
