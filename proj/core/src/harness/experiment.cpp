#include "phasecast/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "phasecast/error.hpp"
#include "phasecast/seq/checkpoint.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::harness {

using diff::Tensor;
using metrics::SampleSet;
using synth::VideoRecord;
using synth::Window;

namespace {

constexpr std::uint64_t kDataSeed = 0xda7a;
constexpr std::uint64_t kSplitSeed = 0x5b17;
constexpr std::uint64_t kTrainSeed = 0x7a19;
constexpr std::uint64_t kEvalSeed = 0xe7a1;
constexpr std::uint64_t kPlotSeed = 0x9107;
constexpr std::size_t kValidationPerKind = 64;

std::vector<Window> evenly_spaced(std::vector<Window> all, std::size_t n) {
  if (all.size() <= n) return all;
  std::vector<Window> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::move(all[i * all.size() / n]));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::vector<const Tensor*> past_features(std::span<const Window> windows) {
  std::vector<const Tensor*> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(&w.past_features);
  return out;
}

std::vector<SampleSet> gan_predictions(const seq::GeneratorParams& params, const seq::ModelConfig& mcfg,
                                       std::span<const Window> windows, std::size_t n_samples, std::uint64_t seed) {
  Rng rng(seed);
  const auto ptrs = past_features(windows);
  std::vector<seq::PredictionSampleSet> sets = seq::predict(params, mcfg, ptrs, n_samples, rng);
  std::vector<SampleSet> out;
  out.reserve(sets.size());
  for (auto& s : sets) out.push_back(std::move(s.samples));
  return out;
}

// Per-video mean of a per-window score.
std::vector<double> per_video(std::span<const metrics::EvalCase> cases, const std::vector<double>& score,
                              const std::vector<bool>& counted) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!counted[i]) continue;
    auto [it, fresh] = acc.try_emplace(cases[i].video_id, 0.0, 0);
    if (fresh) order.push_back(cases[i].video_id);
    it->second.first += score[i];
    ++it->second.second;
  }
  std::vector<double> out;
  for (const auto& id : order) out.push_back(acc[id].first / static_cast<double>(acc[id].second));
  return out;
}

metrics::SignificanceTest compare(const std::string& a, const std::string& b, const std::string& what,
                                  const std::vector<double>& sa, const std::vector<double>& sb) {
  metrics::SignificanceTest t{a, b, what, sa.size(), std::nullopt, {}};
  try {
    t.result = metrics::paired_t_test(sa, sb);
  } catch (const Error& e) {
    t.note = e.what();
  }
  return t;
}

}  // namespace

std::size_t Dataset::shortest_video() const {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto* side : {&train, &test})
    for (const auto& v : *side) m = std::min(m, v.sequence.length());
  return m == std::numeric_limits<std::size_t>::max() ? 0 : m;
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset d;
  std::vector<VideoRecord> videos;
  if (cfg.data.source == "synthetic") {
    d.graph = synth::resolve_graph(cfg.data.graph);
    d.phase_names = d.graph->phases;
    d.feature_dim = cfg.data.feature_dim;
    synth::SyntheticSpec spec{cfg.data.n_videos, cfg.data.feature_dim, cfg.data.noise_sigma};
    videos = synth::generate_videos(*d.graph, spec, derive_seed(cfg.seed, kDataSeed));
  } else {
    d.phase_names = cfg.data.phase_names;
    const auto seqs = synth::load_annotations(cfg.data.annotations, d.phase_names);
    auto feats = synth::load_features(cfg.data.features);
    for (const auto& s : seqs) {
      auto it = feats.find(s.video_id);
      if (it == feats.end()) throw ValidationError("video '" + s.video_id + "' has annotations but no features");
      if (it->second.rows() != s.length()) {
        throw ValidationError("video '" + s.video_id + "': " + std::to_string(s.length()) + " labels but " +
                              std::to_string(it->second.rows()) + " feature rows");
      }
      if (d.feature_dim == 0) d.feature_dim = it->second.cols();
      if (it->second.cols() != d.feature_dim) throw ValidationError("feature width differs between videos");
      videos.push_back(VideoRecord{s, it->second});
    }
  }
  synth::Split split = synth::split_by_video(std::move(videos), cfg.data.train_fraction, derive_seed(cfg.seed, kSplitSeed));
  d.train = std::move(split.train);
  d.test = std::move(split.test);
  if (d.train.empty() || d.test.empty()) throw ValidationError("train/test split left one side empty");
  return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<synth::PhaseSequence> seqs;
  std::vector<std::string> ids;
  std::vector<Tensor> feats;
  nlohmann::ordered_json split;
  split["train"] = nlohmann::ordered_json::array();
  split["test"] = nlohmann::ordered_json::array();
  for (const auto& [side, videos] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
    for (const auto& v : *videos) {
      seqs.push_back(v.sequence);
      ids.push_back(v.sequence.video_id);
      feats.push_back(v.features);
      split[side].push_back(v.sequence.video_id);
    }
  }
  synth::save_annotations(dir / "annotations.csv", seqs);
  // Features sorted by id to match the annotation file.
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::vector<std::string> sorted_ids;
  std::vector<Tensor> sorted_feats;
  for (std::size_t i : order) {
    sorted_ids.push_back(ids[i]);
    sorted_feats.push_back(feats[i]);
  }
  synth::save_features(dir / "features.csv", sorted_ids, sorted_feats);
  split["phases"] = data.phase_names;
  write_text(dir / "split.json", split.dump(2) + "\n");
  if (data.graph) write_text(dir / "graph.json", synth::graph_to_json(*data.graph));
}

seq::ModelConfig model_config(const ExperimentConfig& cfg, const Dataset& data) {
  seq::ModelConfig m = cfg.model;
  m.n_phases = data.phase_names.size();
  m.feature_dim = data.feature_dim;
  m.validate();
  return m;
}

train::TrainConfig train_config(const ExperimentConfig& cfg) {
  train::TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.seed, kTrainSeed);
  return t;
}

PretrainResult run_pretrain(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg) {
  const train::TrainConfig tcfg = train_config(cfg);
  const auto windows = synth::window_dataset(data.train, mcfg.t_past, mcfg.t_future, mcfg.t_past);
  if (windows.empty()) throw ValidationError("no training windows fit the horizon");
  Rng init_rng(derive_seed(tcfg.seed, 0x1417));
  PretrainResult r;
  r.encoder = train::pretrain_encoder(windows, seq::GeneratorParams::init(mcfg, init_rng), mcfg, tcfg, &r.log);
  r.train_accuracy = train::past_phase_accuracy(r.encoder, mcfg, windows);
  const auto held_out = synth::window_dataset(data.test, mcfg.t_past, mcfg.t_future, mcfg.t_past);
  r.test_accuracy = held_out.empty() ? std::nan("") : train::past_phase_accuracy(r.encoder, mcfg, held_out);
  return r;
}

train::GanResult run_gan(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                         const seq::GeneratorParams& pretrained, bool use_discriminator,
                         const std::filesystem::path& checkpoint_dir) {
  const auto windows = synth::window_dataset(data.train, mcfg.t_past, mcfg.t_future, 1);
  std::vector<Window> validation =
      evenly_spaced(synth::transition_windows(data.train, mcfg.t_past, mcfg.t_future), kValidationPerKind);
  for (auto& w : evenly_spaced(synth::window_dataset(data.train, mcfg.t_past, mcfg.t_future, mcfg.t_future),
                               kValidationPerKind)) {
    validation.push_back(std::move(w));
  }
  train::GanOptions opts;
  opts.use_discriminator = use_discriminator;
  opts.checkpoint_dir = checkpoint_dir;
  opts.checkpoint_prefix = use_discriminator ? "gan" : "gan_nodis";
  opts.validation = validation;
  return train::train_gan(windows, pretrained, mcfg, train_config(cfg), cfg.weights, opts);
}

baselines::BaumWelchResult fit_hmm(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                                   const seq::GeneratorParams& encoder) {
  std::vector<Tensor> sequences;
  for (const auto& v : data.train) {
    const std::size_t chunks = v.sequence.length() / mcfg.t_past;
    if (chunks == 0) continue;
    std::vector<Tensor> parts;
    for (std::size_t k = 0; k < chunks; ++k) {
      Tensor part = Tensor::zeros(mcfg.t_past, mcfg.feature_dim);
      for (std::size_t t = 0; t < mcfg.t_past; ++t)
        for (std::size_t f = 0; f < mcfg.feature_dim; ++f) part(t, f) = v.features(k * mcfg.t_past + t, f);
      parts.push_back(std::move(part));
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    const std::vector<Tensor> logits = seq::encode_logits(encoder, mcfg, ptrs);
    Tensor obs = Tensor::zeros(chunks * mcfg.t_past, mcfg.n_phases);
    for (std::size_t k = 0; k < chunks; ++k) {
      for (std::size_t t = 0; t < mcfg.t_past; ++t) {
        const auto row = logits[k].row_span(t);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t q = 0; q < mcfg.n_phases; ++q) z += obs(k * mcfg.t_past + t, q) = std::exp(row[q] - mx);
        for (std::size_t q = 0; q < mcfg.n_phases; ++q) obs(k * mcfg.t_past + t, q) /= z;
      }
    }
    sequences.push_back(std::move(obs));
  }
  baselines::BaumWelchOptions opts;
  opts.iterations = cfg.hmm_iterations;
  opts.seed = derive_seed(cfg.seed, 0x4a4a);
  return baselines::hmm_baum_welch(sequences, mcfg.n_phases, opts);
}

std::vector<Window> evaluation_windows(std::span<const VideoRecord> videos, const seq::ModelConfig& mcfg,
                                       std::size_t stride) {
  std::vector<Window> out;
  for (const auto& v : videos) {
    const std::size_t len = v.sequence.length();
    if (len < mcfg.t_past + mcfg.t_future) continue;
    const std::size_t first = mcfg.t_past - 1, last = len - mcfg.t_future - 1;
    std::set<std::size_t> anchors;
    for (std::size_t t0 = first; t0 <= last; t0 += stride) anchors.insert(t0);
    const auto& l = v.sequence.labels;
    for (std::size_t c = 1; c < len; ++c) {
      if (l[c] != l[c - 1] && c - 1 >= first && c - 1 <= last) anchors.insert(c - 1);
    }
    for (std::size_t t0 : anchors) out.push_back(synth::make_window(v, t0, mcfg.t_past, mcfg.t_future));
  }
  return out;
}

const std::vector<SampleSet>& Evaluation::of(const std::string& model) const {
  for (std::size_t i = 0; i < model_names.size(); ++i)
    if (model_names[i] == model) return predictions[i];
  throw ValidationError("evaluation has no model '" + model + "'");
}

Evaluation evaluate(const ExperimentConfig& cfg, const Dataset& data, const seq::ModelConfig& mcfg,
                    const TrainedModels& models) {
  Evaluation ev;
  ev.windows = evaluation_windows(data.test, mcfg, cfg.metrics.eval_stride);
  if (ev.windows.empty()) throw ValidationError("no test windows fit the horizon");
  ev.cases = metrics::eval_cases(ev.windows);

  const auto ptrs = past_features(ev.windows);
  const std::vector<Tensor> past_logits = seq::encode_logits(models.pretrained, mcfg, ptrs);
  std::vector<SampleSet> constant, hmm;
  for (const auto& lg : past_logits) {
    constant.push_back({baselines::constant_predict(lg, mcfg.t_future)});
    hmm.push_back({baselines::hmm_forecast(lg, models.hmm, mcfg.t_future)});
  }
  const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalSeed);
  ev.model_names = {kConstantModel, kHmmModel};
  ev.predictions = {std::move(constant), std::move(hmm)};
  if (models.gan_no_dis) {
    ev.model_names.push_back(kGanNoDisModel);
    ev.predictions.push_back(gan_predictions(*models.gan_no_dis, mcfg, ev.windows, cfg.train.n_samples, eval_seed));
  }
  ev.model_names.push_back(kGanModel);
  ev.predictions.push_back(gan_predictions(models.gan, mcfg, ev.windows, cfg.train.n_samples, eval_seed));

  metrics::MetricsReport& r = ev.report;
  r.phase_names = data.phase_names;
  r.window_hash = metrics::window_set_hash(ev.cases);
  r.n_windows = ev.cases.size();
  r.n_transition_windows = static_cast<std::size_t>(std::count_if(ev.cases.begin(), ev.cases.end(), metrics::has_transition));
  r.n_samples = cfg.train.n_samples;
  r.t_past = mcfg.t_past;
  r.t_future = mcfg.t_future;
  r.delta = cfg.metrics.delta;
  r.ld_mode = cfg.metrics.ld_mode;
  for (std::size_t m = 0; m < ev.model_names.size(); ++m) r.models.push_back(r.score(ev.model_names[m], ev.cases, ev.predictions[m]));

  // Per-video paired tests of the full model against each other model.
  const std::size_t n = ev.cases.size();
  std::vector<bool> all(n, true), anchored(n);
  for (std::size_t i = 0; i < n; ++i) anchored[i] = !ev.cases[i].future.empty() && ev.cases[i].future[0] != ev.cases[i].last_past;
  auto scores = [&](const std::vector<SampleSet>& preds) {
    std::vector<double> ld(n), hit(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0, best = 1e300;
      for (const auto& s : preds[i]) {
        const auto d = static_cast<double>(metrics::levenshtein(s, ev.cases[i].future));
        sum += d;
        best = std::min(best, d);
      }
      ld[i] = r.ld_mode == metrics::LdMode::kAllSamplesMean ? sum / static_cast<double>(preds[i].size()) : best;
      if (anchored[i]) {
        const std::span<const metrics::EvalCase> one(&ev.cases[i], 1);
        const std::span<const SampleSet> p(&preds[i], 1);
        hit[i] = metrics::per_transition_accuracy(one, p, mcfg.n_phases, cfg.metrics.delta).overall();
      }
    }
    return std::pair{per_video(ev.cases, ld, all), per_video(ev.cases, hit, anchored)};
  };
  const auto full = scores(ev.of(kGanModel));
  for (std::size_t m = 0; m + 1 < ev.model_names.size(); ++m) {
    const auto other = scores(ev.predictions[m]);
    r.tests.push_back(compare(kGanModel, ev.model_names[m], "per-video transition accuracy", full.second, other.second));
    r.tests.push_back(compare(kGanModel, ev.model_names[m], "per-video mean LD", full.first, other.first));
  }
  return ev;
}

void write_status(const std::filesystem::path& path, const std::string& status, std::span<const std::string> failures) {
  nlohmann::ordered_json j;
  j["status"] = status;
  j["failures"] = std::vector<std::string>(failures.begin(), failures.end());
  write_text(path, j.dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const Dataset data = build_dataset(cfg);
  ExperimentResult res;
  res.model = model_config(cfg, data);
  const auto& out = cfg.out_dir;
  const bool write = options.write_outputs;
  if (write) {
    write_text(out / "config.json", config_to_json(cfg));
    save_dataset(data, out / "data");
  }

  res.pretrain = run_pretrain(cfg, data, res.model);
  if (write) {
    std::filesystem::create_directories(out / "pretrain");
    seq::save_checkpoint(out / "pretrain" / "encoder.ckpt", seq::Checkpoint{res.model, res.pretrain.encoder, std::nullopt});
    res.pretrain.log.save(out / "pretrain" / "train_log.tsv");
  }

  TrainedModels models;
  models.pretrained = res.pretrain.encoder;
  if (options.train_ablation) {
    res.gan_no_dis = run_gan(cfg, data, res.model, res.pretrain.encoder, false, write ? out / "gan_nodis" : std::filesystem::path{});
    if (res.gan_no_dis->log.failure) res.failures.push_back("gan_nodis: " + *res.gan_no_dis->log.failure);
    models.gan_no_dis = res.gan_no_dis->best_generator;
    if (write) res.gan_no_dis->log.save(out / "gan_nodis" / "train_log.tsv");
  }
  res.gan = run_gan(cfg, data, res.model, res.pretrain.encoder, true, write ? out / "gan" : std::filesystem::path{});
  if (res.gan.log.failure) res.failures.push_back("gan: " + *res.gan.log.failure);
  models.gan = res.gan.best_generator;
  if (write) res.gan.log.save(out / "gan" / "train_log.tsv");

  res.hmm = fit_hmm(cfg, data, res.model, res.pretrain.encoder);
  models.hmm = res.hmm.params;
  if (write) {
    std::filesystem::create_directories(out / "hmm");
    baselines::save_hmm(out / "hmm" / "hmm.txt", models.hmm);
  }

  res.evaluation = evaluate(cfg, data, res.model, models);
  if (write) {
    res.evaluation.report.save(out / "report");
    Rng rng(derive_seed(cfg.seed, kPlotSeed));
    std::vector<std::size_t> anchored;
    for (std::size_t i = 0; i < res.evaluation.cases.size(); ++i) {
      const auto& c = res.evaluation.cases[i];
      if (c.future[0] != c.last_past) anchored.push_back(i);
    }
    const auto& preds = res.evaluation.of(kGanModel);
    const std::size_t n_plots = std::min(cfg.plots, anchored.size());
    for (std::size_t k = 0; k < n_plots; ++k) {
      const std::size_t i = anchored[k * anchored.size() / n_plots];
      const auto& w = res.evaluation.windows[i];
      char name[64];
      std::snprintf(name, sizeof(name), "timeline_%02zu.svg", k);
      emit_timeline(w, preds[i], data.phase_names, rng, out / "plots" / name,
                    w.video_id + " t0=" + std::to_string(w.t0));
    }
    nlohmann::ordered_json run;
    run["status"] = res.failures.empty() ? "ok" : "partial";
    run["failures"] = res.failures;
    run["pretrain_train_accuracy"] = res.pretrain.train_accuracy;
    run["pretrain_test_accuracy"] = res.pretrain.test_accuracy;
    run["gan_best_epoch"] = res.gan.best_epoch;
    if (res.gan_no_dis) run["gan_nodis_best_epoch"] = res.gan_no_dis->best_epoch;
    run["hmm_log_likelihood"] = res.hmm.log_likelihoods.back();
    write_text(out / "run.json", run.dump(2) + "\n");
  }
  return res;
}

void SweepTable::write_csv(std::ostream& os) const {
  os << "t_past,t_future,status";
  for (const auto& m : models) os << ',' << m;
  os << '\n';
  for (const auto& r : rows) {
    os << r.horizon.t_past << ',' << r.horizon.t_future << ',' << (r.valid ? "ok" : "invalid: " + r.note);
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (!r.valid || m >= r.normalized_ld.size()) {
        os << ",NA";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",%.4f", r.normalized_ld[m]);
        os << buf;
      }
    }
    os << '\n';
  }
}

SweepTable sweep_horizons(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const Dataset data = build_dataset(cfg);
  SweepTable table;
  table.models = {kConstantModel, kHmmModel};
  if (options.train_ablation) table.models.push_back(kGanNoDisModel);
  table.models.push_back(kGanModel);
  const std::size_t shortest = data.shortest_video();
  for (const Horizon& h : cfg.horizons) {
    SweepRow row{h, true, {}, {}};
    if (h.t_past + h.t_future > shortest) {
      row.valid = false;
      row.note = "horizon " + std::to_string(h.t_past + h.t_future) + " s exceeds shortest video (" +
                 std::to_string(shortest) + " s)";
      table.rows.push_back(std::move(row));
      continue;
    }
    ExperimentConfig hc = cfg;
    hc.model.t_past = h.t_past;
    hc.model.t_future = h.t_future;
    const seq::ModelConfig mcfg = model_config(hc, data);
    const PretrainResult pre = run_pretrain(hc, data, mcfg);
    TrainedModels models;
    models.pretrained = pre.encoder;
    if (options.train_ablation) models.gan_no_dis = run_gan(hc, data, mcfg, pre.encoder, false).best_generator;
    models.gan = run_gan(hc, data, mcfg, pre.encoder, true).best_generator;
    models.hmm = fit_hmm(hc, data, mcfg, pre.encoder).params;
    const Evaluation ev = evaluate(hc, data, mcfg, models);
    for (const auto& m : ev.report.models) row.normalized_ld.push_back(m.normalized_ld);
    table.rows.push_back(std::move(row));
  }
  if (options.write_outputs) {
    std::filesystem::create_directories(cfg.out_dir / "sweep");
    std::ofstream f(cfg.out_dir / "sweep" / "sweep.csv");
    if (!f) throw IoError("cannot write " + (cfg.out_dir / "sweep" / "sweep.csv").string());
    table.write_csv(f);
  }
  return table;
}

}  // namespace phasecast::harness
