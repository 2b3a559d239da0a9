#include "phasecast/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "phasecast/error.hpp"
#include "phasecast/synth/workflow.hpp"

namespace phasecast::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  // Records keys outside `allowed`.
  void keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      problems_.push_back(where + ": expected an object");
      return;
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
      if (!ok.count(k)) problems_.push_back(where + ": unknown key '" + k + "'");
    }
  }

  template <class T>
  void get(const json& obj, const char* key, const std::string& where, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("not a non-negative integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::invalid_argument("not a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("not a string");
        out = v.get<std::string>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception& e) {
      problems_.push_back(where + "." + key + ": " + e.what());
    }
  }

  void fail(std::string msg) { problems_.push_back(std::move(msg)); }

 private:
  std::vector<std::string>& problems_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> v;
  auto check = [&v](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  if (data.source == "synthetic") {
    if (data.graph != "cholec7" && data.graph != "mgh12") {
      if (!std::filesystem::exists(data.graph)) {
        v.push_back("data.graph: '" + data.graph + "' is neither a built-in graph nor an existing file");
      } else {
        try {
          synth::load_graph(data.graph);
        } catch (const std::exception& e) {
          v.push_back(std::string("data.graph: ") + e.what());
        }
      }
    }
    check(data.n_videos >= 2, "data.n_videos must be >= 2");
    check(data.noise_sigma >= 0.0, "data.noise_sigma must be >= 0");
    check(data.feature_dim >= 1, "data.feature_dim must be >= 1");
  } else if (data.source == "files") {
    check(!data.annotations.empty() && std::filesystem::exists(data.annotations),
          "data.annotations: file '" + data.annotations.string() + "' does not exist");
    check(!data.features.empty() && std::filesystem::exists(data.features),
          "data.features: file '" + data.features.string() + "' does not exist");
    check(data.phase_names.size() >= 2, "data.phase_names must list at least 2 phases");
  } else {
    v.push_back("data.source must be 'synthetic' or 'files', got '" + data.source + "'");
  }
  check(data.train_fraction > 0.0 && data.train_fraction < 1.0, "data.train_fraction must be in (0, 1)");
  check(model.hidden >= 1, "model.hidden must be >= 1");
  check(model.noise_dim >= 1, "model.noise_dim must be >= 1");
  check(model.t_past >= 1, "model.t_past must be >= 1");
  check(model.t_future >= 1, "model.t_future must be >= 1");
  check(model.gumbel_tau > 0.0, "model.gumbel_tau must be > 0");
  try {
    train.validate();
  } catch (const Error& e) {
    v.push_back(std::string("train: ") + e.what());
  }
  check(hmm_iterations >= 1, "train.hmm_iterations must be >= 1");
  try {
    weights.validate();
  } catch (const Error& e) {
    v.push_back(std::string("weights: ") + e.what());
  }
  check(metrics.delta > 0.0, "metrics.delta must be > 0");
  check(metrics.eval_stride >= 1, "metrics.eval_stride must be >= 1");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    check(horizons[i].t_past >= 1 && horizons[i].t_future >= 1,
          "horizons[" + std::to_string(i) + "]: both lengths must be positive");
  }
  check(!out_dir.empty(), "out_dir must not be empty");
  return v;
}

void ExperimentConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid experiment config (" + std::to_string(v.size()) + " problem" + (v.size() > 1 ? "s" : "") + ")";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValidationError(msg);
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig c;
  std::vector<std::string> problems;
  Reader r(problems);
  r.keys(j, "config", {"schema_version", "seed", "out_dir", "data", "model", "train", "weights", "metrics", "horizons", "plots"});
  if (!j.is_object()) throw ValidationError("experiment config: top level must be an object");
  if (!j.contains("schema_version")) {
    r.fail("config.schema_version is required");
  } else if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != 1) {
    r.fail("config.schema_version: only version 1 is supported");
  }
  r.get(j, "seed", "config", c.seed);
  std::string out = c.out_dir.string();
  r.get(j, "out_dir", "config", out);
  c.out_dir = resolve(base_dir, out);
  r.get(j, "plots", "config", c.plots);

  if (j.contains("data")) {
    const json& d = j["data"];
    r.keys(d, "data", {"source", "graph", "n_videos", "noise_sigma", "feature_dim", "train_fraction", "annotations", "features", "phase_names"});
    r.get(d, "source", "data", c.data.source);
    r.get(d, "graph", "data", c.data.graph);
    if (c.data.graph != "cholec7" && c.data.graph != "mgh12") c.data.graph = resolve(base_dir, c.data.graph).string();
    r.get(d, "n_videos", "data", c.data.n_videos);
    r.get(d, "noise_sigma", "data", c.data.noise_sigma);
    r.get(d, "feature_dim", "data", c.data.feature_dim);
    r.get(d, "train_fraction", "data", c.data.train_fraction);
    std::string a, f;
    r.get(d, "annotations", "data", a);
    r.get(d, "features", "data", f);
    c.data.annotations = resolve(base_dir, a);
    c.data.features = resolve(base_dir, f);
    r.get(d, "phase_names", "data", c.data.phase_names);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    r.keys(m, "model", {"hidden", "noise_dim", "t_past", "t_future", "gumbel_tau"});
    r.get(m, "hidden", "model", c.model.hidden);
    r.get(m, "noise_dim", "model", c.model.noise_dim);
    r.get(m, "t_past", "model", c.model.t_past);
    r.get(m, "t_future", "model", c.model.t_future);
    r.get(m, "gumbel_tau", "model", c.model.gumbel_tau);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    r.keys(t, "train", {"n_samples", "pretrain_epochs", "gan_epochs", "epoch_size", "batch_size", "lr",
                        "checkpoint_every", "validate_every", "hmm_iterations"});
    r.get(t, "n_samples", "train", c.train.n_samples);
    r.get(t, "pretrain_epochs", "train", c.train.pretrain_epochs);
    r.get(t, "gan_epochs", "train", c.train.gan_epochs);
    r.get(t, "epoch_size", "train", c.train.epoch_size);
    r.get(t, "batch_size", "train", c.train.batch_size);
    r.get(t, "lr", "train", c.train.lr);
    r.get(t, "checkpoint_every", "train", c.train.checkpoint_every);
    r.get(t, "validate_every", "train", c.train.validate_every);
    r.get(t, "hmm_iterations", "train", c.hmm_iterations);
  }
  if (j.contains("weights")) {
    const json& w = j["weights"];
    r.keys(w, "weights", {"dis", "rec", "past"});
    r.get(w, "dis", "weights", c.weights.w_dis);
    r.get(w, "rec", "weights", c.weights.w_rec);
    r.get(w, "past", "weights", c.weights.w_past);
  }
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    r.keys(m, "metrics", {"delta", "ld_mode", "eval_stride"});
    r.get(m, "delta", "metrics", c.metrics.delta);
    std::string mode = metrics::to_string(c.metrics.ld_mode);
    r.get(m, "ld_mode", "metrics", mode);
    try {
      c.metrics.ld_mode = metrics::parse_ld_mode(mode);
    } catch (const Error& e) {
      r.fail(std::string("metrics.ld_mode: ") + e.what());
    }
    r.get(m, "eval_stride", "metrics", c.metrics.eval_stride);
  }
  if (j.contains("horizons")) {
    const json& h = j["horizons"];
    if (!h.is_array()) {
      r.fail("horizons: expected an array of [t_past, t_future] pairs");
    } else {
      c.horizons.clear();
      for (std::size_t i = 0; i < h.size(); ++i) {
        const json& p = h[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer() ||
            p[0].get<long long>() < 1 || p[1].get<long long>() < 1) {
          r.fail("horizons[" + std::to_string(i) + "]: expected [t_past, t_future] with positive integers");
          continue;
        }
        c.horizons.push_back(Horizon{p[0].get<std::size_t>(), p[1].get<std::size_t>()});
      }
    }
  }
  for (auto& v : c.violations()) problems.push_back(std::move(v));
  if (!problems.empty()) {
    std::string msg = "invalid experiment config (" + std::to_string(problems.size()) + " problem" +
                      (problems.size() > 1 ? "s" : "") + ")";
    for (const auto& s : problems) msg += "\n  - " + s;
    throw ValidationError(msg);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.string();
  ordered_json d;
  d["source"] = c.data.source;
  if (c.data.source == "synthetic") {
    d["graph"] = c.data.graph;
    d["n_videos"] = c.data.n_videos;
    d["noise_sigma"] = c.data.noise_sigma;
    d["feature_dim"] = c.data.feature_dim;
  } else {
    d["annotations"] = c.data.annotations.string();
    d["features"] = c.data.features.string();
    d["phase_names"] = c.data.phase_names;
  }
  d["train_fraction"] = c.data.train_fraction;
  j["data"] = d;
  j["model"] = {{"hidden", c.model.hidden}, {"noise_dim", c.model.noise_dim}, {"t_past", c.model.t_past},
                {"t_future", c.model.t_future}, {"gumbel_tau", c.model.gumbel_tau}};
  ordered_json t;
  t["n_samples"] = c.train.n_samples;
  t["pretrain_epochs"] = c.train.pretrain_epochs;
  t["gan_epochs"] = c.train.gan_epochs;
  t["epoch_size"] = c.train.epoch_size;
  t["batch_size"] = c.train.batch_size;
  t["lr"] = c.train.lr;
  t["checkpoint_every"] = c.train.checkpoint_every;
  t["validate_every"] = c.train.validate_every;
  t["hmm_iterations"] = c.hmm_iterations;
  j["train"] = t;
  ordered_json w;
  w["dis"] = c.weights.w_dis;
  w["rec"] = c.weights.w_rec;
  w["past"] = c.weights.w_past;
  j["weights"] = w;
  ordered_json m;
  m["delta"] = c.metrics.delta;
  m["ld_mode"] = metrics::to_string(c.metrics.ld_mode);
  m["eval_stride"] = c.metrics.eval_stride;
  j["metrics"] = m;
  ordered_json h = ordered_json::array();
  for (const auto& p : c.horizons) h.push_back({p.t_past, p.t_future});
  j["horizons"] = h;
  j["plots"] = c.plots;
  return j.dump(2) + "\n";
}

}  // namespace phasecast::harness
