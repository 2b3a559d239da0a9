#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phasecast::synth {
struct Window;
}

namespace phasecast::metrics {

std::size_t levenshtein(std::span<const int> a, std::span<const int> b);

// levenshtein(a, b) * reference_len / T_f. Both sequences must have length T_f > 0.
double normalized_ld(std::span<const int> a, std::span<const int> b, double reference_len = 15.0);

// Ground truth seen by the metrics: the last observed label and the future.
struct EvalCase {
  std::string video_id;
  std::size_t t0 = 0;
  int last_past = 0;
  std::vector<int> future;
};

EvalCase eval_case(const synth::Window& w);
std::vector<EvalCase> eval_cases(std::span<const synth::Window> windows);

// Sampled future trajectories for one window, each of length T_f.
using SampleSet = std::vector<std::vector<int>>;

struct TransitionEvent {
  std::string video_id;
  std::size_t time = 0;  // absolute second of the first frame in the new phase
  int from = 0;
  int to = 0;
  std::size_t offset = 0;  // future step at which it happens
};

// Every change point in [last_past, future...].
std::vector<TransitionEvent> find_transitions(const EvalCase& c);

bool has_transition(const EvalCase& c);

struct TransitionAccuracy {
  std::vector<std::size_t> hits;    // per destination phase
  std::vector<std::size_t> totals;  // per destination phase

  std::size_t total_hits() const;
  std::size_t total_events() const;
  double overall() const;  // NaN when no events
  double of(std::size_t phase) const;  // NaN when no events to that phase
};

// Scores the transition at the first future step of each window (windows
// without one are skipped, so each change is counted once provided the
// window set holds one anchored window per change). A change to q is a hit
// when any sample contains q within future steps [0, delta].
TransitionAccuracy per_transition_accuracy(std::span<const EvalCase> cases, std::span<const SampleSet> predictions,
                                           std::size_t n_phases, double delta = 15.0);

enum class LdMode { kAllSamplesMean, kBestOfSamples };
enum class LdSegment { kOverall, kTransitionsOnly };

std::string to_string(LdMode m);
std::string to_string(LdSegment s);
LdMode parse_ld_mode(const std::string& s);

// Mean over windows of the per-window LD (sample mean or min).
double avg_ld(std::span<const EvalCase> cases, std::span<const SampleSet> predictions, LdMode mode,
              LdSegment segment);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;  // two-sided
  std::size_t df = 0;
};

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// FNV-1a over (video id, t0, labels) of every window, as 16 hex digits.
std::string window_set_hash(std::span<const EvalCase> cases);

struct ModelScores {
  std::string name;
  TransitionAccuracy accuracy;
  double ld_overall = 0.0;
  std::optional<double> ld_transitions;
  double normalized_ld = 0.0;
};

struct SignificanceTest {
  std::string model_a;
  std::string model_b;
  std::string score;  // what was compared per video
  std::size_t n = 0;
  std::optional<TTestResult> result;
  std::string note;  // why result is empty
};

struct MetricsReport {
  std::vector<std::string> phase_names;
  std::vector<ModelScores> models;
  std::vector<SignificanceTest> tests;
  std::string window_hash;
  std::size_t n_windows = 0;
  std::size_t n_transition_windows = 0;
  std::size_t n_samples = 0;
  std::size_t t_past = 0;
  std::size_t t_future = 0;
  double delta = 15.0;
  LdMode ld_mode = LdMode::kAllSamplesMean;

  ModelScores score(std::string name, std::span<const EvalCase> cases, std::span<const SampleSet> predictions) const;

  // to_phase,n_transitions,<model>... with one row per phase plus Overall.
  // Accuracies are percentages; NA where a phase has no transitions.
  void write_accuracy_csv(std::ostream& os) const;
  // metric,<model>... rows: ld_overall, ld_transitions, normalized_ld.
  void write_ld_csv(std::ostream& os) const;
  void write_summary_json(std::ostream& os) const;

  void save(const std::filesystem::path& dir) const;  // accuracy.csv, ld.csv, summary.json
};

}  // namespace phasecast::metrics
