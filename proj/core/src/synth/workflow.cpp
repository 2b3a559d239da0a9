#include "phasecast/synth/workflow.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <queue>
#include <set>
#include <sstream>

#include "phasecast/error.hpp"

namespace phasecast::synth {

namespace {

constexpr std::size_t kMaxTrajectorySeconds = 1'000'000;

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError(where + ": unknown key '" + it.key() + "'");
  }
}

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

}  // namespace

int DurationModel::sample(Rng& rng) const {
  if (kind == Kind::kUniform) {
    std::uniform_int_distribution<int> d(min_seconds, max_seconds);
    return d(rng);
  }
  std::geometric_distribution<int> d(1.0 / mean_seconds);
  return 1 + d(rng);
}

bool WorkflowGraph::has_edge(std::size_t from, std::size_t to) const {
  for (const Edge& e : successors.at(from))
    if (e.to == to) return true;
  return false;
}

void WorkflowGraph::validate() const {
  const std::size_t n = phases.size();
  if (n < 2) throw ValidationError("graph: needs at least two phases");
  if (successors.size() != n || durations.size() != n || terminal.size() != n) {
    throw ValidationError("graph: per-phase tables have inconsistent sizes");
  }
  if (start >= n) throw ValidationError("graph: start phase out of range");
  std::set<std::string> names(phases.begin(), phases.end());
  if (names.size() != n) throw ValidationError("graph: duplicate phase names");

  bool any_terminal = false;
  for (std::size_t i = 0; i < n; ++i) {
    const DurationModel& d = durations[i];
    if (d.kind == DurationModel::Kind::kUniform && (d.min_seconds < 1 || d.max_seconds < d.min_seconds)) {
      throw ValidationError("graph: phase '" + phases[i] + "' has invalid uniform duration bounds");
    }
    if (d.kind == DurationModel::Kind::kGeometric && !(d.mean_seconds >= 1.0)) {
      throw ValidationError("graph: phase '" + phases[i] + "' geometric mean must be >= 1 s");
    }
    if (terminal[i]) {
      any_terminal = true;
      if (!successors[i].empty()) throw ValidationError("graph: terminal phase '" + phases[i] + "' has successors");
      continue;
    }
    if (successors[i].empty()) throw ValidationError("graph: non-terminal phase '" + phases[i] + "' has no successors");
    double total = 0.0;
    std::set<std::size_t> seen;
    for (const Edge& e : successors[i]) {
      if (e.to >= n) throw ValidationError("graph: edge from '" + phases[i] + "' targets an unknown phase");
      if (e.to == i) throw ValidationError("graph: self-loop on '" + phases[i] + "' (durations model dwell time)");
      if (!(e.probability > 0.0)) throw ValidationError("graph: non-positive edge probability from '" + phases[i] + "'");
      if (!seen.insert(e.to).second) throw ValidationError("graph: duplicate edge from '" + phases[i] + "'");
      total += e.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("graph: outgoing probabilities of '" + phases[i] + "' sum to " + std::to_string(total));
    }
  }
  if (!any_terminal) throw ValidationError("graph: no terminal phase");

  // Every phase must reach a terminal phase (reverse BFS from terminals).
  std::vector<std::vector<std::size_t>> preds(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const Edge& e : successors[i]) preds[e.to].push_back(i);
  std::vector<bool> reaches(n, false);
  std::queue<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i)
    if (terminal[i]) {
      reaches[i] = true;
      q.push(i);
    }
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop();
    for (std::size_t p : preds[v])
      if (!reaches[p]) {
        reaches[p] = true;
        q.push(p);
      }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!reaches[i]) throw ValidationError("graph: phase '" + phases[i] + "' cannot reach a terminal phase");
}

namespace {

struct GraphBuilder {
  WorkflowGraph g;

  std::size_t phase(std::string name, DurationModel d) {
    g.phases.push_back(std::move(name));
    g.durations.push_back(d);
    g.successors.emplace_back();
    g.terminal.push_back(false);
    return g.phases.size() - 1;
  }
  void edge(std::size_t from, std::size_t to, double p) { g.successors[from].push_back(Edge{to, p}); }
};

}  // namespace

WorkflowGraph WorkflowGraph::cholec7() {
  GraphBuilder b;
  const auto prep = b.phase("Preparation", DurationModel::uniform(8, 20));
  const auto calot = b.phase("Calot Triangle Dissection", DurationModel::uniform(25, 60));
  const auto clip = b.phase("Clipping and Cutting", DurationModel::uniform(10, 25));
  const auto dissect = b.phase("Gallbladder Dissection", DurationModel::uniform(20, 50));
  const auto pack = b.phase("Gallbladder Packaging", DurationModel::uniform(8, 20));
  const auto clean = b.phase("Cleaning and Coagulation", DurationModel::uniform(10, 30));
  const auto retract = b.phase("Gallbladder Retraction", DurationModel::uniform(8, 20));
  b.edge(prep, calot, 1.0);
  b.edge(calot, clip, 0.85);
  b.edge(calot, dissect, 0.15);
  b.edge(clip, dissect, 0.8);
  b.edge(clip, calot, 0.2);
  b.edge(dissect, pack, 0.65);
  b.edge(dissect, clean, 0.35);
  b.edge(pack, clean, 0.6);
  b.edge(pack, retract, 0.4);
  b.edge(clean, retract, 0.7);
  b.edge(clean, pack, 0.3);
  b.g.start = prep;
  b.g.terminal[retract] = true;
  b.g.validate();
  return b.g;
}

WorkflowGraph WorkflowGraph::mgh12() {
  GraphBuilder b;
  // Block 1
  const auto port = b.phase("Port placement", DurationModel::uniform(10, 25));
  const auto fundus = b.phase("Fundus retraction", DurationModel::uniform(6, 15));
  const auto release = b.phase("Release GB peritoneum", DurationModel::uniform(15, 40));
  const auto calot = b.phase("Dissection of Calot's triangle", DurationModel::uniform(20, 50));
  const auto cp1 = b.phase("Checkpoint 1", DurationModel::uniform(5, 12));
  // Block 2
  const auto clip_a = b.phase("Clip Cystic Artery", DurationModel::uniform(6, 18));
  const auto clip_d = b.phase("Clip Cystic Duct", DurationModel::uniform(6, 18));
  const auto div_a = b.phase("Divide Cystic Artery", DurationModel::uniform(5, 14));
  const auto div_d = b.phase("Divide Cystic Duct", DurationModel::uniform(5, 14));
  const auto cp2 = b.phase("Checkpoint 2", DurationModel::uniform(5, 12));
  // Block 3
  const auto remove = b.phase("Remove GB from liver bed", DurationModel::uniform(30, 70));
  const auto bagging = b.phase("Bagging", DurationModel::uniform(10, 25));

  b.edge(port, fundus, 1.0);
  b.edge(fundus, release, 1.0);
  b.edge(release, calot, 1.0);
  b.edge(calot, cp1, 0.8);
  b.edge(calot, release, 0.2);
  b.edge(cp1, clip_a, 0.5);
  b.edge(cp1, clip_d, 0.5);
  b.edge(clip_a, clip_d, 0.6);
  b.edge(clip_a, div_a, 0.3);
  b.edge(clip_a, calot, 0.1);
  b.edge(clip_d, clip_a, 0.45);
  b.edge(clip_d, div_d, 0.35);
  b.edge(clip_d, calot, 0.2);
  b.edge(div_a, div_d, 0.6);
  b.edge(div_a, clip_d, 0.25);
  b.edge(div_a, cp2, 0.15);
  b.edge(div_d, div_a, 0.5);
  b.edge(div_d, cp2, 0.5);
  b.edge(cp2, remove, 1.0);
  b.edge(remove, bagging, 1.0);
  b.g.start = port;
  b.g.terminal[bagging] = true;
  b.g.validate();
  return b.g;
}

WorkflowGraph parse_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("graph: top level must be an object");
  reject_unknown(doc, {"schema_version", "phases", "edges", "start", "terminal"}, "graph");
  if (need(doc, "schema_version", "graph") != 1) throw ParseError("graph: unsupported schema_version");

  WorkflowGraph g;
  std::map<std::string, std::size_t> index;
  try {
    for (const json& p : need(doc, "phases", "graph")) {
      reject_unknown(p, {"name", "duration"}, "graph.phases");
      const std::string name = need(p, "name", "graph.phases").get<std::string>();
      const json& d = need(p, "duration", "graph.phases[" + name + "]");
      const std::string kind = need(d, "kind", "duration").get<std::string>();
      DurationModel dm;
      if (kind == "uniform") {
        reject_unknown(d, {"kind", "min", "max"}, "duration");
        dm = DurationModel::uniform(need(d, "min", "duration").get<int>(), need(d, "max", "duration").get<int>());
      } else if (kind == "geometric") {
        reject_unknown(d, {"kind", "mean"}, "duration");
        dm = DurationModel::geometric(need(d, "mean", "duration").get<double>());
      } else {
        throw ParseError("graph: unknown duration kind '" + kind + "'");
      }
      if (!index.emplace(name, g.phases.size()).second) throw ParseError("graph: duplicate phase '" + name + "'");
      g.phases.push_back(name);
      g.durations.push_back(dm);
      g.successors.emplace_back();
      g.terminal.push_back(false);
    }
    auto lookup = [&](const std::string& name) {
      auto it = index.find(name);
      if (it == index.end()) throw ParseError("graph: unknown phase '" + name + "'");
      return it->second;
    };
    for (const json& e : need(doc, "edges", "graph")) {
      reject_unknown(e, {"from", "to", "p"}, "graph.edges");
      const std::size_t from = lookup(need(e, "from", "edge").get<std::string>());
      g.successors[from].push_back(Edge{lookup(need(e, "to", "edge").get<std::string>()), need(e, "p", "edge").get<double>()});
    }
    g.start = lookup(need(doc, "start", "graph").get<std::string>());
    for (const json& t : need(doc, "terminal", "graph")) g.terminal[lookup(t.get<std::string>())] = true;
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
  g.validate();
  return g;
}

WorkflowGraph load_graph(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read graph file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_graph(ss.str());
}

std::string graph_to_json(const WorkflowGraph& g) {
  json doc;
  doc["schema_version"] = 1;
  doc["phases"] = json::array();
  for (std::size_t i = 0; i < g.n_phases(); ++i) {
    const DurationModel& d = g.durations[i];
    json dur = d.kind == DurationModel::Kind::kUniform
                   ? json{{"kind", "uniform"}, {"min", d.min_seconds}, {"max", d.max_seconds}}
                   : json{{"kind", "geometric"}, {"mean", d.mean_seconds}};
    doc["phases"].push_back(json{{"name", g.phases[i]}, {"duration", dur}});
  }
  doc["edges"] = json::array();
  for (std::size_t i = 0; i < g.n_phases(); ++i)
    for (const Edge& e : g.successors[i])
      doc["edges"].push_back(json{{"from", g.phases[i]}, {"to", g.phases[e.to]}, {"p", e.probability}});
  doc["start"] = g.phases[g.start];
  doc["terminal"] = json::array();
  for (std::size_t i = 0; i < g.n_phases(); ++i)
    if (g.terminal[i]) doc["terminal"].push_back(g.phases[i]);
  return doc.dump(2) + "\n";
}

WorkflowGraph resolve_graph(const std::string& name_or_path) {
  if (name_or_path == "cholec7") return WorkflowGraph::cholec7();
  if (name_or_path == "mgh12") return WorkflowGraph::mgh12();
  return load_graph(name_or_path);
}

PhaseSequence sample_trajectory(const WorkflowGraph& graph, Rng& rng, std::string video_id) {
  graph.validate();
  PhaseSequence seq;
  seq.video_id = std::move(video_id);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t phase = graph.start;
  while (true) {
    const int dwell = graph.durations[phase].sample(rng);
    seq.labels.insert(seq.labels.end(), static_cast<std::size_t>(dwell), static_cast<int>(phase));
    if (seq.labels.size() > kMaxTrajectorySeconds) throw ValidationError("sample_trajectory: trajectory too long");
    if (graph.terminal[phase]) break;
    const auto& out = graph.successors[phase];
    double r = u(rng);
    std::size_t next = out.back().to;
    for (const Edge& e : out) {
      if (r < e.probability) {
        next = e.to;
        break;
      }
      r -= e.probability;
    }
    phase = next;
  }
  return seq;
}

}  // namespace phasecast::synth
