#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phasecast/baselines/hmm.hpp"
#include "phasecast/error.hpp"
#include "phasecast/harness/config.hpp"
#include "phasecast/harness/experiment.hpp"
#include "phasecast/seq/checkpoint.hpp"

namespace fs = std::filesystem;
namespace h = phasecast::harness;
namespace seq = phasecast::seq;
using nlohmann::ordered_json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalid = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON); built-in defaults when omitted");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out", c.out, "Override the output directory");
}

h::ExperimentConfig resolve(const Common& c) {
  h::ExperimentConfig cfg = c.config.empty() ? h::ExperimentConfig{} : h::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << std::endl; }

int fail(const std::string& command, const std::string& kind, const std::string& message, int code) {
  ordered_json j;
  j["error"] = {{"command", command}, {"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  return code;
}

fs::path encoder_path(const h::ExperimentConfig& cfg) { return cfg.out_dir / "pretrain" / "encoder.ckpt"; }
fs::path gan_path(const h::ExperimentConfig& cfg, bool dis) {
  return dis ? cfg.out_dir / "gan" / "gan_best.ckpt" : cfg.out_dir / "gan_nodis" / "gan_nodis_best.ckpt";
}
fs::path hmm_path(const h::ExperimentConfig& cfg) { return cfg.out_dir / "hmm" / "hmm.txt"; }

seq::GeneratorParams load_generator(const fs::path& path, const seq::ModelConfig& mcfg, const char* hint) {
  if (!fs::exists(path)) {
    throw phasecast::IoError("missing " + path.string() + " (run '" + hint + "' first)");
  }
  seq::Checkpoint ck = seq::load_checkpoint(path);
  if (!(ck.config == mcfg)) throw phasecast::ValidationError(path.string() + " was trained with a different model config");
  if (!ck.generator) throw phasecast::ValidationError(path.string() + " holds no generator");
  return std::move(*ck.generator);
}

h::PretrainResult pretrain_and_save(const h::ExperimentConfig& cfg, const h::Dataset& data,
                                    const seq::ModelConfig& mcfg) {
  h::PretrainResult r = h::run_pretrain(cfg, data, mcfg);
  fs::create_directories(encoder_path(cfg).parent_path());
  seq::save_checkpoint(encoder_path(cfg), seq::Checkpoint{mcfg, r.encoder, std::nullopt});
  r.log.save(cfg.out_dir / "pretrain" / "train_log.tsv");
  return r;
}

int cmd_generate(const Common& c) {
  const auto cfg = resolve(c);
  const h::Dataset data = h::build_dataset(cfg);
  h::save_dataset(data, cfg.out_dir / "data");
  ordered_json j;
  j["command"] = "generate-data";
  j["out"] = (cfg.out_dir / "data").string();
  j["train_videos"] = data.train.size();
  j["test_videos"] = data.test.size();
  j["phases"] = data.phase_names.size();
  emit(j);
  return 0;
}

int cmd_pretrain(const Common& c) {
  const auto cfg = resolve(c);
  const h::Dataset data = h::build_dataset(cfg);
  const auto mcfg = h::model_config(cfg, data);
  const auto r = pretrain_and_save(cfg, data, mcfg);
  ordered_json j;
  j["command"] = "pretrain";
  j["checkpoint"] = encoder_path(cfg).string();
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  emit(j);
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  const h::Dataset data = h::build_dataset(cfg);
  const auto mcfg = h::model_config(cfg, data);
  const seq::GeneratorParams encoder = fs::exists(encoder_path(cfg))
                                           ? load_generator(encoder_path(cfg), mcfg, "pretrain")
                                           : pretrain_and_save(cfg, data, mcfg).encoder;
  ordered_json j;
  j["command"] = "train";
  ordered_json failures = ordered_json::array();
  for (bool dis : {false, true}) {
    const fs::path dir = cfg.out_dir / (dis ? "gan" : "gan_nodis");
    const auto r = h::run_gan(cfg, data, mcfg, encoder, dis, dir);
    r.log.save(dir / "train_log.tsv");
    j[dis ? "gan_best_epoch" : "gan_nodis_best_epoch"] = r.best_epoch;
    if (r.log.failure) failures.push_back(std::string(dis ? "gan: " : "gan_nodis: ") + *r.log.failure);
  }
  const auto hmm = h::fit_hmm(cfg, data, mcfg, encoder);
  fs::create_directories(hmm_path(cfg).parent_path());
  phasecast::baselines::save_hmm(hmm_path(cfg), hmm.params);
  j["hmm_log_likelihood"] = hmm.log_likelihoods.back();
  j["failures"] = failures;
  emit(j);
  return failures.empty() ? 0 : kExitRuntime;
}

h::TrainedModels load_models(const h::ExperimentConfig& cfg, const seq::ModelConfig& mcfg) {
  h::TrainedModels m;
  m.pretrained = load_generator(encoder_path(cfg), mcfg, "pretrain");
  m.gan = load_generator(gan_path(cfg, true), mcfg, "train");
  if (fs::exists(gan_path(cfg, false))) m.gan_no_dis = load_generator(gan_path(cfg, false), mcfg, "train");
  if (!fs::exists(hmm_path(cfg))) throw phasecast::IoError("missing " + hmm_path(cfg).string() + " (run 'train' first)");
  m.hmm = phasecast::baselines::load_hmm(hmm_path(cfg));
  return m;
}

int cmd_evaluate(const Common& c) {
  const auto cfg = resolve(c);
  const h::Dataset data = h::build_dataset(cfg);
  const auto mcfg = h::model_config(cfg, data);
  const h::Evaluation ev = h::evaluate(cfg, data, mcfg, load_models(cfg, mcfg));
  ev.report.save(cfg.out_dir / "report");
  ordered_json j;
  j["command"] = "evaluate";
  j["report"] = (cfg.out_dir / "report").string();
  j["window_set_hash"] = ev.report.window_hash;
  for (const auto& m : ev.report.models) j["overall_accuracy"][m.name] = m.accuracy.overall();
  emit(j);
  return 0;
}

int cmd_plot(const Common& c, std::size_t count) {
  const auto cfg = resolve(c);
  const h::Dataset data = h::build_dataset(cfg);
  const auto mcfg = h::model_config(cfg, data);
  const h::TrainedModels models = load_models(cfg, mcfg);
  const h::Evaluation ev = h::evaluate(cfg, data, mcfg, models);
  phasecast::Rng rng(phasecast::derive_seed(cfg.seed, 0x9107));
  std::vector<std::size_t> anchored;
  for (std::size_t i = 0; i < ev.cases.size(); ++i)
    if (ev.cases[i].future[0] != ev.cases[i].last_past) anchored.push_back(i);
  const std::size_t n = std::min(count, anchored.size());
  ordered_json files = ordered_json::array();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = anchored[k * anchored.size() / n];
    char name[64];
    std::snprintf(name, sizeof(name), "timeline_%02zu.svg", k);
    const fs::path path = cfg.out_dir / "plots" / name;
    h::emit_timeline(ev.windows[i], ev.of(h::kGanModel)[i], data.phase_names, rng, path,
                     ev.windows[i].video_id + " t0=" + std::to_string(ev.windows[i].t0));
    files.push_back(path.string());
  }
  ordered_json j;
  j["command"] = "plot";
  j["files"] = files;
  emit(j);
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto cfg = resolve(c);
  const h::SweepTable t = h::sweep_horizons(cfg);
  ordered_json j;
  j["command"] = "sweep";
  j["table"] = (cfg.out_dir / "sweep" / "sweep.csv").string();
  j["rows"] = t.rows.size();
  emit(j);
  return 0;
}

int cmd_full(const Common& c) {
  const auto cfg = resolve(c);
  const h::ExperimentResult r = h::run_experiment(cfg);
  ordered_json j;
  j["command"] = "full-run";
  j["out"] = cfg.out_dir.string();
  j["window_set_hash"] = r.evaluation.report.window_hash;
  for (const auto& m : r.evaluation.report.models) j["overall_accuracy"][m.name] = m.accuracy.overall();
  j["failures"] = r.failures;
  emit(j);
  return r.failures.empty() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phasecast: surgical phase trajectory forecasting experiments"};
  app.require_subcommand(1);
  Common common;
  std::size_t plot_count = 3;
  auto* gen = app.add_subcommand("generate-data", "Simulate (or load) videos and write the dataset files");
  auto* pre = app.add_subcommand("pretrain", "Supervised pretraining of the encoder");
  auto* trn = app.add_subcommand("train", "Adversarial training (with and without discriminator) and HMM fit");
  auto* evl = app.add_subcommand("evaluate", "Score all models on the shared test windows");
  auto* swp = app.add_subcommand("sweep", "Retrain and score for each configured (past, future) horizon");
  auto* plt = app.add_subcommand("plot", "Write timeline SVGs for transition windows");
  auto* full = app.add_subcommand("full-run", "generate-data, pretrain, train, evaluate and plot in one go");
  for (auto* cmd : {gen, pre, trn, evl, swp, plt, full}) add_common(cmd, common);
  plt->add_option("--count", plot_count, "Number of timelines")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("", "usage", e.what(), kExitUsage);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*gen) return cmd_generate(common);
    if (*pre) return cmd_pretrain(common);
    if (*trn) return cmd_train(common);
    if (*evl) return cmd_evaluate(common);
    if (*swp) return cmd_sweep(common);
    if (*plt) return cmd_plot(common, plot_count);
    return cmd_full(common);
  } catch (const phasecast::Error& e) {
    const std::string& k = e.kind();
    const int code = k == "io" ? kExitIo : (k == "validation" || k == "parse") ? kExitInvalid : kExitRuntime;
    return fail(name, k, e.what(), code);
  } catch (const std::exception& e) {
    return fail(name, "internal", e.what(), kExitRuntime);
  }
}
