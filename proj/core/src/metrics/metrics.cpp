#include "phasecast/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "phasecast/error.hpp"
#include "phasecast/synth/dataset.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_predictions(std::span<const EvalCase> cases, std::span<const SampleSet> predictions, const char* op) {
  if (cases.size() != predictions.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(cases.size()) + " windows but " +
                     std::to_string(predictions.size()) + " prediction sets");
  }
  for (std::size_t w = 0; w < cases.size(); ++w) {
    if (predictions[w].empty()) throw ValidationError(std::string(op) + ": window " + std::to_string(w) + " has no samples");
    for (const auto& s : predictions[w]) {
      if (s.size() != cases[w].future.size()) {
        throw ShapeError(std::string(op) + ": sample length " + std::to_string(s.size()) + " differs from horizon " +
                         std::to_string(cases[w].future.size()));
      }
    }
  }
}

std::string percent(double fraction) {
  if (std::isnan(fraction)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::size_t levenshtein(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double normalized_ld(std::span<const int> a, std::span<const int> b, double reference_len) {
  if (a.size() != b.size()) throw ShapeError("normalized_ld: sequences differ in length");
  if (a.empty()) throw ValidationError("normalized_ld: horizon length is 0");
  return static_cast<double>(levenshtein(a, b)) * reference_len / static_cast<double>(a.size());
}

EvalCase eval_case(const synth::Window& w) {
  if (w.past_labels.empty()) throw ValidationError("eval_case: window has no past labels");
  return EvalCase{w.video_id, w.t0, w.past_labels.back(), w.future_labels};
}

std::vector<EvalCase> eval_cases(std::span<const synth::Window> windows) {
  std::vector<EvalCase> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(eval_case(w));
  return out;
}

std::vector<TransitionEvent> find_transitions(const EvalCase& c) {
  std::vector<TransitionEvent> out;
  int prev = c.last_past;
  for (std::size_t k = 0; k < c.future.size(); ++k) {
    if (c.future[k] != prev) out.push_back(TransitionEvent{c.video_id, c.t0 + 1 + k, prev, c.future[k], k});
    prev = c.future[k];
  }
  return out;
}

bool has_transition(const EvalCase& c) {
  return std::any_of(c.future.begin(), c.future.end(), [&](int l) { return l != c.last_past; });
}

std::size_t TransitionAccuracy::total_hits() const { return std::accumulate(hits.begin(), hits.end(), std::size_t{0}); }
std::size_t TransitionAccuracy::total_events() const {
  return std::accumulate(totals.begin(), totals.end(), std::size_t{0});
}
double TransitionAccuracy::overall() const {
  const std::size_t n = total_events();
  return n == 0 ? kNaN : static_cast<double>(total_hits()) / static_cast<double>(n);
}
double TransitionAccuracy::of(std::size_t phase) const {
  if (phase >= totals.size() || totals[phase] == 0) return kNaN;
  return static_cast<double>(hits[phase]) / static_cast<double>(totals[phase]);
}

TransitionAccuracy per_transition_accuracy(std::span<const EvalCase> cases, std::span<const SampleSet> predictions,
                                           std::size_t n_phases, double delta) {
  if (!(delta > 0.0)) throw ValidationError("per_transition_accuracy: delta must be > 0, got " + format_double(delta));
  check_predictions(cases, predictions, "per_transition_accuracy");
  TransitionAccuracy acc{std::vector<std::size_t>(n_phases, 0), std::vector<std::size_t>(n_phases, 0)};
  const auto reach = static_cast<std::size_t>(std::floor(delta));
  for (std::size_t w = 0; w < cases.size(); ++w) {
    const EvalCase& c = cases[w];
    if (c.future.empty() || c.future[0] == c.last_past) continue;
    const int to = c.future[0];
    if (to < 0 || static_cast<std::size_t>(to) >= n_phases) throw ValidationError("per_transition_accuracy: label out of range");
    const std::size_t last = std::min(reach, c.future.size() - 1);
    bool hit = false;
    for (const auto& s : predictions[w]) {
      for (std::size_t j = 0; j <= last && !hit; ++j) hit = s[j] == to;
      if (hit) break;
    }
    ++acc.totals[static_cast<std::size_t>(to)];
    if (hit) ++acc.hits[static_cast<std::size_t>(to)];
  }
  return acc;
}

std::string to_string(LdMode m) { return m == LdMode::kAllSamplesMean ? "all-samples-mean" : "best-of-samples"; }
std::string to_string(LdSegment s) { return s == LdSegment::kOverall ? "overall" : "transitions-only"; }

LdMode parse_ld_mode(const std::string& s) {
  if (s == "all-samples-mean") return LdMode::kAllSamplesMean;
  if (s == "best-of-samples") return LdMode::kBestOfSamples;
  throw ValidationError("unknown LD mode '" + s + "' (expected all-samples-mean or best-of-samples)");
}

double avg_ld(std::span<const EvalCase> cases, std::span<const SampleSet> predictions, LdMode mode,
              LdSegment segment) {
  check_predictions(cases, predictions, "avg_ld");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t w = 0; w < cases.size(); ++w) {
    if (segment == LdSegment::kTransitionsOnly && !has_transition(cases[w])) continue;
    double sum = 0.0, best = std::numeric_limits<double>::infinity();
    for (const auto& s : predictions[w]) {
      const auto d = static_cast<double>(levenshtein(s, cases[w].future));
      sum += d;
      best = std::min(best, d);
    }
    total += mode == LdMode::kAllSamplesMean ? sum / static_cast<double>(predictions[w].size()) : best;
    ++n;
  }
  if (n == 0) throw ValidationError("avg_ld: segment '" + to_string(segment) + "' contains no windows");
  return total / static_cast<double>(n);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("paired_t_test: score lists differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("paired_t_test: need at least 2 pairs, got " + std::to_string(n));
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) throw ValidationError("paired_t_test: differences have zero variance");
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return TTestResult{t, p, n - 1};
}

std::string window_set_hash(std::span<const EvalCase> cases) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& c : cases) {
    mix(c.video_id.data(), c.video_id.size());
    const std::uint64_t t0 = c.t0;
    mix(&t0, sizeof t0);
    const std::int32_t last = c.last_past;
    mix(&last, sizeof last);
    for (int l : c.future) {
      const std::int32_t v = l;
      mix(&v, sizeof v);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ModelScores MetricsReport::score(std::string name, std::span<const EvalCase> cases,
                                 std::span<const SampleSet> predictions) const {
  ModelScores s;
  s.name = std::move(name);
  s.accuracy = per_transition_accuracy(cases, predictions, phase_names.size(), delta);
  s.ld_overall = avg_ld(cases, predictions, ld_mode, LdSegment::kOverall);
  if (std::any_of(cases.begin(), cases.end(), has_transition)) {
    s.ld_transitions = avg_ld(cases, predictions, ld_mode, LdSegment::kTransitionsOnly);
  }
  s.normalized_ld = t_future == 0 ? kNaN : s.ld_overall * 15.0 / static_cast<double>(t_future);
  return s;
}

void MetricsReport::write_accuracy_csv(std::ostream& os) const {
  os << "to_phase,n_transitions";
  for (const auto& m : models) os << ',' << csv_field(m.name);
  os << '\n';
  for (std::size_t q = 0; q < phase_names.size(); ++q) {
    const std::size_t n = models.empty() ? 0 : models.front().accuracy.totals.at(q);
    os << csv_field(phase_names[q]) << ',' << n;
    for (const auto& m : models) os << ',' << percent(m.accuracy.of(q));
    os << '\n';
  }
  os << "Overall," << (models.empty() ? 0 : models.front().accuracy.total_events());
  for (const auto& m : models) os << ',' << percent(m.accuracy.overall());
  os << '\n';
}

void MetricsReport::write_ld_csv(std::ostream& os) const {
  os << "metric";
  for (const auto& m : models) os << ',' << csv_field(m.name);
  os << "\nld_overall";
  for (const auto& m : models) os << ',' << fixed4(m.ld_overall);
  os << "\nld_transitions";
  for (const auto& m : models) os << ',' << (m.ld_transitions ? fixed4(*m.ld_transitions) : "NA");
  os << "\nnormalized_ld";
  for (const auto& m : models) os << ',' << fixed4(m.normalized_ld);
  os << '\n';
}

void MetricsReport::write_summary_json(std::ostream& os) const {
  using nlohmann::ordered_json;
  auto num = [](double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); };
  ordered_json j;
  j["schema_version"] = 1;
  j["window_set_hash"] = window_hash;
  j["n_windows"] = n_windows;
  j["n_transition_windows"] = n_transition_windows;
  j["n_samples"] = n_samples;
  j["t_past"] = t_past;
  j["t_future"] = t_future;
  j["delta"] = delta;
  j["ld_mode"] = to_string(ld_mode);
  j["phases"] = phase_names;
  ordered_json ms = ordered_json::array();
  for (const auto& m : models) {
    ordered_json e;
    e["name"] = m.name;
    e["overall_accuracy"] = num(m.accuracy.overall());
    e["hits"] = m.accuracy.hits;
    e["totals"] = m.accuracy.totals;
    e["ld_overall"] = m.ld_overall;
    e["ld_transitions"] = m.ld_transitions ? ordered_json(*m.ld_transitions) : ordered_json(nullptr);
    e["normalized_ld"] = num(m.normalized_ld);
    ms.push_back(std::move(e));
  }
  j["models"] = std::move(ms);
  ordered_json ts = ordered_json::array();
  for (const auto& t : tests) {
    ordered_json e;
    e["model_a"] = t.model_a;
    e["model_b"] = t.model_b;
    e["score"] = t.score;
    e["n"] = t.n;
    if (t.result) {
      e["t"] = t.result->t;
      e["p"] = t.result->p;
      e["df"] = t.result->df;
    } else {
      e["t"] = nullptr;
      e["p"] = nullptr;
      e["note"] = t.note;
    }
    ts.push_back(std::move(e));
  }
  j["significance"] = std::move(ts);
  os << j.dump(2) << '\n';
}

void MetricsReport::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IoError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("accuracy.csv");
    write_accuracy_csv(f);
  }
  {
    auto f = open("ld.csv");
    write_ld_csv(f);
  }
  auto f = open("summary.json");
  write_summary_json(f);
}

}  // namespace phasecast::metrics
