#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phasecast/random.hpp"

namespace phasecast::synth {

// Seconds spent in a phase per visit.
struct DurationModel {
  enum class Kind { kUniform, kGeometric };
  Kind kind = Kind::kUniform;
  int min_seconds = 1;  // uniform: inclusive bounds
  int max_seconds = 1;
  double mean_seconds = 1.0;  // geometric on {1, 2, ...}

  static DurationModel uniform(int lo, int hi) { return {Kind::kUniform, lo, hi, 0.5 * (lo + hi)}; }
  static DurationModel geometric(double mean) { return {Kind::kGeometric, 1, 1, mean}; }

  int sample(Rng& rng) const;
};

struct Edge {
  std::size_t to = 0;
  double probability = 0.0;
};

// Semi-Markov phase process: a visit draws its duration, then moves to a
// successor drawn from the outgoing edges. Terminal phases end the sequence
// and have no successors.
struct WorkflowGraph {
  std::vector<std::string> phases;
  std::vector<std::vector<Edge>> successors;
  std::vector<DurationModel> durations;
  std::size_t start = 0;
  std::vector<bool> terminal;

  std::size_t n_phases() const { return phases.size(); }

  // Throws ValidationError listing the offending phase.
  void validate() const;
  bool has_edge(std::size_t from, std::size_t to) const;

  // 7 phases, linear with skips and one back-and-forth pair (Cholec80-like
  // label space). Probabilities and durations are synthetic.
  static WorkflowGraph cholec7();
  // 12 phases in three blocks with permutable clip/divide orderings and
  // back-transitions to dissection (MGH200-like label space). Synthetic.
  static WorkflowGraph mgh12();
};

// JSON graph file, schema version 1:
//   {
//     "schema_version": 1,
//     "phases": [ {"name": "...", "duration": {"kind": "uniform", "min": 5, "max": 20}}
//               | {"name": "...", "duration": {"kind": "geometric", "mean": 12.0}}, ... ],
//     "edges": [ {"from": "<name>", "to": "<name>", "p": 0.5}, ... ],
//     "start": "<name>",
//     "terminal": ["<name>", ...]
//   }
// Unknown keys are rejected.
WorkflowGraph parse_graph(std::string_view json_text);
WorkflowGraph load_graph(const std::filesystem::path& path);
std::string graph_to_json(const WorkflowGraph& graph);

// A built-in graph name ("cholec7", "mgh12") or a path to a graph file.
WorkflowGraph resolve_graph(const std::string& name_or_path);

struct PhaseSequence {
  std::string video_id;
  std::vector<int> labels;  // one label per second

  std::size_t length() const { return labels.size(); }
  friend bool operator==(const PhaseSequence&, const PhaseSequence&) = default;
};

// Starts at graph.start, ends after a terminal phase's visit.
PhaseSequence sample_trajectory(const WorkflowGraph& graph, Rng& rng, std::string video_id = {});

}  // namespace phasecast::synth
