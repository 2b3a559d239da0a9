#include "phasecast/synth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "phasecast/error.hpp"
#include "phasecast/random.hpp"
#include "phasecast/synth/features.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::synth {

using diff::Tensor;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

// Tracks the (video_id, second) ordering contract shared by both formats.
struct OrderCheck {
  std::string current;
  long long expected_second = 0;
  bool started = false;

  // Returns true when a new video starts.
  bool step(const std::string& vid, long long second, const std::string& where) {
    if (!started || vid != current) {
      if (started && vid < current) throw ParseError(where + "video ids are not sorted ('" + vid + "' after '" + current + "')");
      if (second != 0) throw ParseError(where + "video '" + vid + "' does not start at second 0");
      current = vid;
      expected_second = 1;
      started = true;
      return true;
    }
    if (second != expected_second) {
      throw ParseError(where + "expected second " + std::to_string(expected_second) + " for video '" + vid +
                       "', got " + std::to_string(second) + " (rows must be contiguous at 1 Hz)");
    }
    ++expected_second;
    return false;
  }
};

}  // namespace

std::vector<PhaseSequence> load_annotations(const std::filesystem::path& path,
                                            std::span<const std::string> vocabulary) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read annotations " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || trim(line) != "video_id,second,phase_id") {
    throw ParseError(at_line(path, 1) + "expected header 'video_id,second,phase_id'");
  }
  std::vector<PhaseSequence> out;
  OrderCheck order;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = at_line(path, lineno);
    const auto cols = split_csv(line);
    if (cols.size() != 3) throw ParseError(where + "expected 3 columns, got " + std::to_string(cols.size()));
    const std::string vid = trim(cols[0]);
    if (vid.empty()) throw ParseError(where + "empty video_id");
    long long second = 0;
    try {
      second = parse_int(trim(cols[1]), "second");
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    const std::string phase = trim(cols[2]);
    long long id = -1;
    const bool numeric = !phase.empty() && std::all_of(phase.begin(), phase.end(), [](char c) {
      return std::isdigit(static_cast<unsigned char>(c)) || c == '-';
    });
    if (numeric) {
      id = parse_int(phase, "phase_id");
      if (id < 0 || static_cast<std::size_t>(id) >= vocabulary.size()) {
        throw ValidationError(where + "phase id " + phase + " outside [0, " + std::to_string(vocabulary.size()) + ")");
      }
    } else {
      auto it = std::find(vocabulary.begin(), vocabulary.end(), phase);
      if (it == vocabulary.end()) {
        std::string vocab;
        for (const auto& v : vocabulary) vocab += (vocab.empty() ? "" : ", ") + v;
        throw ParseError(where + "unknown phase '" + phase + "'; known phases: " + vocab);
      }
      id = it - vocabulary.begin();
    }
    if (order.step(vid, second, where)) out.push_back(PhaseSequence{vid, {}});
    out.back().labels.push_back(static_cast<int>(id));
  }
  return out;
}

void save_annotations(const std::filesystem::path& path, std::span<const PhaseSequence> seqs) {
  std::vector<const PhaseSequence*> sorted;
  for (const auto& s : seqs) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const PhaseSequence* a, const PhaseSequence* b) { return a->video_id < b->video_id; });
  std::ofstream os(path);
  if (!os) throw IoError("cannot write annotations " + path.string());
  os << "video_id,second,phase_id\n";
  for (const PhaseSequence* s : sorted)
    for (std::size_t t = 0; t < s->labels.size(); ++t) os << s->video_id << ',' << t << ',' << s->labels[t] << '\n';
  if (!os) throw IoError("failed writing annotations " + path.string());
}

std::map<std::string, Tensor> load_features(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read features " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(at_line(path, 1) + "empty feature file");
  const auto header = split_csv(trim(line));
  if (header.size() < 3 || header[0] != "video_id" || header[1] != "second") {
    throw ParseError(at_line(path, 1) + "expected header 'video_id,second,f0,...'");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j + 2] != "f" + std::to_string(j)) throw ParseError(at_line(path, 1) + "feature columns must be f0..f{D-1}");

  std::map<std::string, std::vector<double>> rows;
  std::map<std::string, std::size_t> lengths;
  OrderCheck order;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = at_line(path, lineno);
    const auto cols = split_csv(line);
    if (cols.size() != dim + 2) throw ParseError(where + "expected " + std::to_string(dim + 2) + " columns");
    try {
      const long long second = parse_int(trim(cols[1]), "second");
      order.step(cols[0], second, where);
      auto& buf = rows[cols[0]];
      for (std::size_t j = 0; j < dim; ++j) buf.push_back(parse_double(trim(cols[j + 2]), "feature"));
      ++lengths[cols[0]];
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      throw ParseError(msg.rfind(path.string(), 0) == 0 ? msg : where + msg);
    }
  }
  std::map<std::string, Tensor> out;
  for (auto& [vid, buf] : rows) out.emplace(vid, Tensor(diff::Shape{lengths[vid], dim}, std::move(buf)));
  return out;
}

void save_features(const std::filesystem::path& path, std::span<const std::string> video_ids,
                   std::span<const Tensor> features) {
  if (video_ids.size() != features.size()) throw ValidationError("save_features: ids and tensors differ in count");
  if (features.empty()) throw ValidationError("save_features: nothing to write");
  std::vector<std::size_t> order(video_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return video_ids[a] < video_ids[b]; });
  std::ofstream os(path);
  if (!os) throw IoError("cannot write features " + path.string());
  const std::size_t dim = features.front().cols();
  os << "video_id,second";
  for (std::size_t j = 0; j < dim; ++j) os << ",f" << j;
  os << '\n';
  for (std::size_t k : order) {
    const Tensor& f = features[k];
    for (std::size_t t = 0; t < f.rows(); ++t) {
      os << video_ids[k] << ',' << t;
      for (std::size_t j = 0; j < dim; ++j) os << ',' << format_double(f(t, j));
      os << '\n';
    }
  }
  if (!os) throw IoError("failed writing features " + path.string());
}

std::size_t window_count(std::size_t length, std::size_t t_past, std::size_t t_future, std::size_t stride) {
  if (stride < 1) throw ValidationError("window_count: stride must be >= 1");
  if (length < t_past + t_future) return 0;
  return (length - t_past - t_future) / stride + 1;
}

Window make_window(const VideoRecord& video, std::size_t t0, std::size_t t_past, std::size_t t_future) {
  const auto& labels = video.sequence.labels;
  if (t0 + 1 < t_past || t0 + t_future >= labels.size() || video.features.rows() != labels.size()) {
    throw ValidationError("make_window: window at t0=" + std::to_string(t0) + " does not fit video '" +
                          video.sequence.video_id + "'");
  }
  Window w;
  w.video_id = video.sequence.video_id;
  w.t0 = t0;
  const std::size_t first = t0 + 1 - t_past;
  const std::size_t dim = video.features.cols();
  w.past_features = Tensor::zeros(t_past, dim);
  std::copy_n(video.features.data() + first * dim, t_past * dim, w.past_features.data());
  w.past_labels.assign(labels.begin() + static_cast<long>(first), labels.begin() + static_cast<long>(t0 + 1));
  w.future_labels.assign(labels.begin() + static_cast<long>(t0 + 1),
                         labels.begin() + static_cast<long>(t0 + 1 + t_future));
  return w;
}

std::vector<Window> window_dataset(std::span<const VideoRecord> videos, std::size_t t_past, std::size_t t_future,
                                   std::size_t stride) {
  std::vector<Window> out;
  for (const VideoRecord& v : videos) {
    const std::size_t n = window_count(v.sequence.length(), t_past, t_future, stride);
    for (std::size_t k = 0; k < n; ++k) out.push_back(make_window(v, k * stride + t_past - 1, t_past, t_future));
  }
  return out;
}

std::vector<Window> transition_windows(std::span<const VideoRecord> videos, std::size_t t_past,
                                       std::size_t t_future) {
  std::vector<Window> out;
  for (const VideoRecord& v : videos) {
    const auto& l = v.sequence.labels;
    for (std::size_t t = 1; t < l.size(); ++t) {
      if (l[t] == l[t - 1]) continue;
      const std::size_t t0 = t - 1;
      if (t0 + 1 < t_past || t0 + t_future >= l.size()) continue;
      out.push_back(make_window(v, t0, t_past, t_future));
    }
  }
  return out;
}

Split split_by_video(std::vector<VideoRecord> videos, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("split_by_video: train_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5b1));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(videos.size())));
  std::vector<bool> is_train(videos.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  Split s;
  for (std::size_t i = 0; i < videos.size(); ++i) (is_train[i] ? s.train : s.test).push_back(std::move(videos[i]));
  return s;
}

std::vector<VideoRecord> generate_videos(const WorkflowGraph& graph, const SyntheticSpec& spec, std::uint64_t seed) {
  graph.validate();
  std::vector<VideoRecord> out;
  out.reserve(spec.n_videos);
  for (std::size_t i = 0; i < spec.n_videos; ++i) {
    Rng rng(derive_seed(seed, i));
    char id[32];
    std::snprintf(id, sizeof(id), "vid%04zu", i);
    VideoRecord v;
    v.sequence = sample_trajectory(graph, rng, id);
    v.features = emit_features(v.sequence, graph.n_phases(), spec.feature_dim, spec.noise_sigma, std::nullopt, rng);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace phasecast::synth
