// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.
//
//   phasecast_acceptance [--cli PATH] [--only 1,5,9] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phasecast/baselines/hmm.hpp"
#include "phasecast/diff/grad_check.hpp"
#include "phasecast/harness/experiment.hpp"
#include "phasecast/metrics/metrics.hpp"
#include "phasecast/seq/generator.hpp"
#include "phasecast/synth/dataset.hpp"
#include "phasecast/train/losses.hpp"
#include "phasecast/train/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace phasecast;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Settings shared by the synthetic benchmark runs: 12 phases, 150/50 videos.
harness::ExperimentConfig benchmark_config(std::uint64_t seed) {
  harness::ExperimentConfig c;
  c.seed = seed;
  c.data.graph = "mgh12";
  c.data.n_videos = 200;
  c.data.train_fraction = 0.75;
  c.train.gan_epochs = 300;
  c.train.lr = 1e-3;
  return c;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

seq::ModelConfig tiny_model() {
  seq::ModelConfig c;
  c.n_phases = 3;
  c.hidden = 4;
  c.feature_dim = 3;
  c.noise_dim = 2;
  c.t_past = 3;
  c.t_future = 3;
  return c;
}

std::vector<synth::Window> random_windows(const seq::ModelConfig& cfg, std::size_t n, Rng& rng) {
  std::vector<synth::Window> out;
  std::uniform_int_distribution<int> lab(0, static_cast<int>(cfg.n_phases) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    synth::Window w;
    w.past_features = testing::random_tensor(cfg.t_past, cfg.feature_dim, rng);
    for (std::size_t t = 0; t < cfg.t_past; ++t) w.past_labels.push_back(lab(rng));
    for (std::size_t t = 0; t < cfg.t_future; ++t) w.future_labels.push_back(lab(rng));
    w.video_id = "v" + std::to_string(i);
    out.push_back(std::move(w));
  }
  return out;
}

train::Batch batch_of(const std::vector<synth::Window>& windows, const seq::ModelConfig& cfg) {
  std::vector<const synth::Window*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w);
  return train::make_batch(ptrs, cfg);
}

seq::GeneratorVars generator_vars(std::span<const Var> v) {
  return seq::GeneratorVars{{v[0], v[1]}, {v[2], v[3]}, v[4], v[5], v[6], v[7]};
}
seq::DiscriminatorVars discriminator_vars(std::span<const Var> v) {
  return seq::DiscriminatorVars{{v[0], v[1]}, {v[2], v[3]}, v[4], v[5]};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome gradient_integrity() {
  const auto start = std::chrono::steady_clock::now();
  const seq::ModelConfig cfg = tiny_model();
  double worst_g = 0, worst_d = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(seed, 0xc1));
    const auto windows = random_windows(cfg, 2, rng);
    const train::Batch batch = batch_of(windows, cfg);
    seq::GeneratorParams gp = seq::GeneratorParams::init(cfg, rng);
    seq::DiscriminatorParams dp = seq::DiscriminatorParams::init(cfg, rng);
    const seq::GeneratorNoise gnoise = seq::draw_generator_noise(cfg, 2 * 2, rng);
    const seq::GeneratorNoise dnoise = seq::draw_generator_noise(cfg, 2, rng);
    std::vector<Tensor> xs;
    for (Tensor* p : gp.tensors()) xs.push_back(*p);
    for (Tensor* p : dp.tensors()) xs.push_back(*p);
    const std::size_t ng = gp.tensors().size();

    const auto g = diff::grad_check(
        [&](Tape& t, std::span<const Var> v) {
          const auto gv = generator_vars(v.subspan(0, ng));
          const auto dv = discriminator_vars(v.subspan(ng));
          return train::generator_objective(gv, &dv, cfg, train::bind(t, batch), 2, gnoise, train::LossWeights{})
              .total;
        },
        xs, 1e-6);
    const auto d = diff::grad_check(
        [&](Tape& t, std::span<const Var> v) {
          const auto gv = generator_vars(v.subspan(0, ng));
          const auto dv = discriminator_vars(v.subspan(ng));
          return train::discriminator_objective(gv, dv, cfg, train::bind(t, batch), dnoise);
        },
        xs, 1e-6);
    worst_g = std::max(worst_g, g.max_rel_error);
    worst_d = std::max(worst_d, d.max_rel_error);
  }
  return {worst_g < 1e-3 && worst_d < 1e-3 && seconds_since(start) < 60,
          "max rel err generator objective " + fmt("%.2e", worst_g) + ", discriminator objective " +
              fmt("%.2e", worst_d) + " (limit 1e-3, 5 seeds, all 14 parameter tensors)"};
}

Outcome gumbel_contract() {
  Rng rng(0x6b);
  std::size_t mismatches = 0;
  double worst_onehot = 0;
  const std::size_t k = 5, draws = 10000;
  std::vector<std::size_t> counts(k, 0);
  std::normal_distribution<double> n(0.0, 2.0);
  for (std::size_t i = 0; i < draws; ++i) {
    Tape t;
    Tensor logits = Tensor::zeros(1, k);
    for (auto& v : logits.values()) v = n(rng);
    const auto s = seq::gumbel_softmax(t.constant(logits), 0.5, rng);
    if (s.hard != s.soft.value().argmax_rows()) ++mismatches;

    // Well-separated logits: a shuffled ladder with spacing 8.
    Tensor ladder = Tensor::zeros(1, k);
    for (std::size_t c = 0; c < k; ++c) ladder[c] = 8.0 * static_cast<double>(c);
    std::shuffle(ladder.values().begin(), ladder.values().end(), rng);
    const auto cold = seq::gumbel_softmax(t.constant(ladder), 1e-4, rng);
    for (std::size_t c = 0; c < k; ++c) {
      const double target = static_cast<int>(c) == cold.hard[0] ? 1.0 : 0.0;
      worst_onehot = std::max(worst_onehot, std::abs(cold.soft.value()(0, c) - target));
    }

    const auto u = seq::gumbel_softmax(t.constant(Tensor::zeros(1, k)), 1.0, rng);
    ++counts[static_cast<std::size_t>(u.hard[0])];
  }
  const double p = 1.0 / static_cast<double>(k);
  const double mean = p * draws, sd = std::sqrt(draws * p * (1 - p));
  double worst_z = 0;
  for (auto c : counts) worst_z = std::max(worst_z, std::abs(static_cast<double>(c) - mean) / sd);
  const bool pass = mismatches == 0 && worst_onehot <= 1e-6 && worst_z <= 3.0;
  return {pass, std::to_string(mismatches) + " hard/argmax mismatches in 10000 draws; max one-hot gap at tau=1e-4 " +
                    fmt("%.1e", worst_onehot) + "; max |z| of uniform category counts " + fmt("%.2f", worst_z)};
}

// Observations o in {0, 1}; each likelihood row holds p(o | state).
std::vector<Tensor> simulate_hmm(const Tensor& a, const std::vector<std::vector<double>>& emit, std::size_t n_seq,
                                 std::size_t len, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Tensor> out;
  for (std::size_t s = 0; s < n_seq; ++s) {
    Tensor lik = Tensor::zeros(len, 2);
    std::size_t state = u(rng) < 0.5 ? 0 : 1;
    for (std::size_t t = 0; t < len; ++t) {
      if (t > 0) state = u(rng) < a(state, 0) ? 0 : 1;
      const std::size_t o = u(rng) < emit[state][0] ? 0 : 1;
      for (std::size_t q = 0; q < 2; ++q) lik(t, q) = emit[q][o];
    }
    out.push_back(std::move(lik));
  }
  return out;
}

Outcome em_correctness() {
  const auto start = std::chrono::steady_clock::now();
  std::size_t violations = 0;
  double worst_drop = 0;
  for (std::uint64_t run = 0; run < 50; ++run) {
    Rng rng(derive_seed(run, 0xe3));
    const std::size_t n = 2 + run % 4;
    std::vector<Tensor> seqs;
    for (int s = 0; s < 5; ++s) {
      Tensor lik = testing::random_tensor(20, n, rng);
      for (auto& v : lik.values()) v = std::abs(v) + 1e-3;
      seqs.push_back(std::move(lik));
    }
    baselines::BaumWelchOptions o;
    o.iterations = 30;
    o.seed = run;
    o.random_init = true;
    o.learn_confusion = run % 3 == 0;
    const auto r = baselines::hmm_baum_welch(seqs, n, o);
    for (std::size_t k = 1; k < r.log_likelihoods.size(); ++k) {
      const double drop = r.log_likelihoods[k - 1] - r.log_likelihoods[k];
      worst_drop = std::max(worst_drop, drop);
      if (drop > 1e-8) ++violations;
    }
  }
  const Tensor truth = Tensor::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  Rng rng(0xe4);
  const auto obs = simulate_hmm(truth, {{0.8, 0.2}, {0.3, 0.7}}, 200, 100, rng);
  baselines::BaumWelchOptions o;
  o.iterations = 300;
  o.random_init = true;
  o.seed = 1;
  const auto fit = baselines::hmm_baum_welch(obs, 2, o).params.transition;
  double direct = 0, swapped = 0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      direct = std::max(direct, std::abs(fit(i, j) - truth(i, j)));
      swapped = std::max(swapped, std::abs(fit(1 - i, 1 - j) - truth(i, j)));
    }
  const double err = std::min(direct, swapped);
  return {violations == 0 && err <= 0.05 && seconds_since(start) < 120,
          std::to_string(violations) + " log-likelihood decreases over 50 runs (largest drop " + fmt("%.1e", worst_drop) +
              "); recovered A = [[" + fmt("%.3f", fit(0, 0)) + ", " + fmt("%.3f", fit(0, 1)) + "], [" +
              fmt("%.3f", fit(1, 0)) + ", " + fmt("%.3f", fit(1, 1)) + "]], max entry error " + fmt("%.3f", err)};
}

std::size_t ld_oracle(const std::vector<int>& a, std::size_t i, const std::vector<int>& b, std::size_t j,
                      std::vector<std::size_t>& memo) {
  if (i == 0) return j;
  if (j == 0) return i;
  std::size_t& m = memo[i * (b.size() + 1) + j];
  if (m != SIZE_MAX) return m;
  m = std::min({ld_oracle(a, i - 1, b, j - 1, memo) + (a[i - 1] == b[j - 1] ? 0 : 1),
                ld_oracle(a, i - 1, b, j, memo) + 1, ld_oracle(a, i, b, j - 1, memo) + 1});
  return m;
}

Outcome metric_oracles() {
  std::vector<std::vector<int>> seqs{{}}, layer{{}};
  for (int len = 1; len <= 6; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : layer)
      for (int c = 0; c < 3; ++c) {
        auto t = s;
        t.push_back(c);
        next.push_back(t);
      }
    seqs.insert(seqs.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  std::size_t mismatches = 0, pairs = 0;
  std::vector<std::size_t> memo;
  for (const auto& a : seqs)
    for (const auto& b : seqs) {
      memo.assign((a.size() + 1) * (b.size() + 1), SIZE_MAX);
      if (metrics::levenshtein(a, b) != ld_oracle(a, a.size(), b, b.size(), memo)) ++mismatches;
      ++pairs;
    }
  Rng rng(0x4d);
  std::uniform_int_distribution<std::size_t> len(0, 12);
  std::uniform_int_distribution<int> sym(0, 3);
  auto rnd = [&] {
    std::vector<int> s(len(rng));
    for (auto& v : s) v = sym(rng);
    return s;
  };
  std::size_t axiom_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = rnd(), b = rnd(), c = rnd();
    const auto ab = metrics::levenshtein(a, b);
    if ((ab == 0) != (a == b) || ab != metrics::levenshtein(b, a) ||
        metrics::levenshtein(a, c) > ab + metrics::levenshtein(b, c))
      ++axiom_failures;
  }
  const std::vector<double> diffs{1, 2, 3, 4, 5}, zeros(5, 0.0);
  const auto tt = metrics::paired_t_test(diffs, zeros);
  const bool t_ok = std::abs(tt.t - 4.2426) < 1e-3 && std::abs(tt.p - 0.0132) < 1e-3 && tt.df == 4;
  return {mismatches == 0 && axiom_failures == 0 && t_ok,
          std::to_string(mismatches) + " oracle mismatches over " + std::to_string(pairs) + " pairs; " +
              std::to_string(axiom_failures) + " axiom failures on 1000 random triples; t-test t=" + fmt("%.4f", tt.t) +
              " p=" + fmt("%.4f", tt.p) + " df=" + std::to_string(tt.df)};
}

std::string listed(const std::vector<double>& v, const char* f) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : "/") + fmt(f, x);
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

Outcome baseline_ordering() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> gan, constant, hmm;
  std::size_t structural = 0, oracle_hits = 0, events = 0;
  for (auto seed : kSeeds) {
    const auto r = harness::run_experiment(benchmark_config(seed), harness::RunOptions{false, false});
    const auto& rep = r.evaluation.report;
    for (const auto& m : rep.models) {
      if (m.name == harness::kGanModel) gan.push_back(m.accuracy.overall());
      if (m.name == harness::kConstantModel) constant.push_back(m.accuracy.overall());
      if (m.name == harness::kHmmModel) hmm.push_back(m.accuracy.overall());
    }
    // The constant model only ever repeats one phase, so it can only be
    // credited with a change to q when it was already predicting q.
    const auto& cases = r.evaluation.cases;
    const auto& preds = r.evaluation.of(harness::kConstantModel);
    std::vector<metrics::SampleSet> from_truth;
    for (std::size_t w = 0; w < cases.size(); ++w) {
      const auto& c = cases[w];
      for (const auto& s : preds[w])
        if (std::any_of(s.begin(), s.end(), [&](int l) { return l != s[0]; })) ++structural;
      if (!c.future.empty() && c.future[0] != c.last_past) ++events;
      from_truth.push_back({std::vector<int>(c.future.size(), c.last_past)});
    }
    oracle_hits += metrics::per_transition_accuracy(cases, from_truth, rep.phase_names.size(), rep.delta).total_hits();
  }
  const double secs = seconds_since(start);
  const double g = mean(gan), c = mean(constant), h = mean(hmm);
  const bool pass = g > c && g > h && structural == 0 && oracle_hits == 0 && secs < 1800;
  return {pass, "overall accuracy, mean over seeds 1/2/3: GAN " + fmt("%.4f", g) + " [" + listed(gan, "%.4f") +
                    "], constant " + fmt("%.4f", c) + " [" + listed(constant, "%.4f") + "], HMM " + fmt("%.4f", h) +
                    " [" + listed(hmm, "%.4f") + "]" + "; constant-from-true-phase hits " +
                    std::to_string(oracle_hits) + "/" + std::to_string(events) + "; non-constant constant-model samples " +
                    std::to_string(structural) + "; " + fmt("%.0f s", secs)};
}

Outcome horizon_trends() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<harness::Horizon> hs{{15, 10}, {15, 45}, {5, 15}, {15, 15}};
  std::vector<std::vector<double>> nld(hs.size());
  std::size_t invalid = 0;
  for (auto seed : kSeeds) {
    auto cfg = benchmark_config(seed);
    cfg.horizons = hs;
    const auto table = harness::sweep_horizons(cfg, harness::RunOptions{false, false});
    const auto col = static_cast<std::size_t>(
        std::find(table.models.begin(), table.models.end(), harness::kGanModel) - table.models.begin());
    for (std::size_t i = 0; i < hs.size(); ++i) {
      if (!table.rows[i].valid || col >= table.rows[i].normalized_ld.size()) {
        ++invalid;
        continue;
      }
      nld[i].push_back(table.rows[i].normalized_ld[col]);
    }
  }
  const double secs = seconds_since(start);
  if (invalid > 0) return {false, std::to_string(invalid) + " sweep rows invalid"};
  const double a = mean(nld[0]), b = mean(nld[1]), c = mean(nld[2]), d = mean(nld[3]);
  std::string detail = "GAN normalized LD, mean over seeds 1/2/3 [per seed]:";
  const double means[4] = {a, b, c, d};
  for (std::size_t i = 0; i < hs.size(); ++i) {
    detail += std::string(i ? "," : "") + " (" + std::to_string(hs[i].t_past) + "," + std::to_string(hs[i].t_future) +
              ") " + fmt("%.3f", means[i]) + " [" + listed(nld[i], "%.3f") + "]";
  }
  return {b > a && c > d, detail + "; " + fmt("%.0f s", secs)};
}

harness::ExperimentConfig small_config(std::uint64_t seed) {
  harness::ExperimentConfig c;
  c.seed = seed;
  c.data.n_videos = 16;
  c.data.feature_dim = 8;
  c.model.hidden = 8;
  c.model.noise_dim = 4;
  c.train.n_samples = 4;
  c.train.pretrain_epochs = 3;
  c.train.gan_epochs = 6;
  c.train.epoch_size = 16;
  c.train.checkpoint_every = 3;
  c.train.validate_every = 2;
  c.train.lr = 1e-3;
  c.hmm_iterations = 10;
  c.metrics.eval_stride = 10;
  c.plots = 1;
  return c;
}

Outcome ablation_wiring(const fs::path& work) {
  const seq::ModelConfig cfg = tiny_model();
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(derive_seed(seed, 0xab));
    const auto windows = random_windows(cfg, 3, rng);
    const train::Batch batch = batch_of(windows, cfg);
    const auto gp = seq::GeneratorParams::init(cfg, rng);
    const auto noise = seq::draw_generator_noise(cfg, 3 * 2, rng);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    const train::LossWeights w{u(rng), u(rng), u(rng)};
    Tape t;
    const auto obj = train::generator_objective(seq::bind(t, gp, true), nullptr, cfg, train::bind(t, batch), 2, noise, w);
    const double expected = w.w_rec * obj.variety.value().item() + w.w_past * obj.past.value().item();
    if (obj.adversarial.valid() || obj.total.value().item() != expected) ++mismatches;
  }
  auto c = small_config(5);
  c.out_dir = work / "ablation";
  harness::run_experiment(c);
  const std::string acc = read_file(c.out_dir / "report/accuracy.csv");
  const std::string ld = read_file(c.out_dir / "report/ld.csv");
  const std::string acc_header = acc.substr(0, acc.find('\n'));
  const std::string ld_header = ld.substr(0, ld.find('\n'));
  const bool columns = acc_header == "to_phase,n_transitions,Constant Model,HMM,GAN w/o Dis.,GAN" &&
                       ld_header == "metric,Constant Model,HMM,GAN w/o Dis.,GAN";
  return {mismatches == 0 && columns, std::to_string(mismatches) +
                                          " bitwise objective mismatches in 25 random batches; report header '" +
                                          acc_header + "'"};
}

Outcome pretraining_sanity() {
  double acc[2] = {0, 0};
  double chance = 0;
  const double sigmas[2] = {0.0, 0.3};
  for (int k = 0; k < 2; ++k) {
    auto c = benchmark_config(1);
    c.data.noise_sigma = sigmas[k];
    const auto data = harness::build_dataset(c);
    const auto mcfg = harness::model_config(c, data);
    acc[k] = harness::run_pretrain(c, data, mcfg).test_accuracy;
    if (k == 0) {
      std::vector<double> freq(mcfg.n_phases, 0.0);
      double total = 0;
      for (const auto& v : data.test)
        for (int l : v.sequence.labels) {
          ++freq[static_cast<std::size_t>(l)];
          ++total;
        }
      chance = std::max(1.0 / static_cast<double>(mcfg.n_phases), *std::max_element(freq.begin(), freq.end()) / total);
    }
  }
  return {acc[0] > 0.95 && acc[1] > chance && acc[1] < acc[0],
          "held-out past accuracy after 20 epochs: noise-free " + fmt("%.2f%%", 100 * acc[0]) + ", sigma 0.3 " +
              fmt("%.2f%%", 100 * acc[1]) + ", chance " + fmt("%.2f%%", 100 * chance)};
}

Outcome reproducibility(const fs::path& work, const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  const fs::path cfg_path = work / "repro.json";
  std::ofstream(cfg_path) << R"({
  "schema_version": 1,
  "data": {"graph": "cholec7", "n_videos": 16, "feature_dim": 8},
  "model": {"hidden": 8, "noise_dim": 4},
  "train": {"n_samples": 4, "pretrain_epochs": 3, "gan_epochs": 6, "epoch_size": 16, "lr": 0.001,
            "checkpoint_every": 3, "validate_every": 2, "hmm_iterations": 10},
  "metrics": {"eval_stride": 10},
  "plots": 1
}
)";
  std::vector<int> codes;
  for (const char* run : {"run_a", "run_b"}) {
    const std::string cmd = "\"" + cli + "\" full-run --config \"" + cfg_path.string() + "\" --seed 7 --out \"" +
                            (work / run).string() + "\" > \"" + (work / (std::string(run) + ".log")).string() + "\" 2>&1";
    codes.push_back(std::system(cmd.c_str()));
  }
  if (codes[0] != 0 || codes[1] != 0) {
    return {false, "full-run exit codes " + std::to_string(codes[0]) + ", " + std::to_string(codes[1])};
  }
  std::string detail;
  bool same = true;
  for (const char* f : {"report/accuracy.csv", "report/ld.csv"}) {
    const std::string a = read_file(work / "run_a" / f), b = read_file(work / "run_b" / f);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += std::string(f) + (eq ? " identical (" + std::to_string(a.size()) + " bytes); " : " DIFFERS; ");
  }
  return {same, detail + "two full-runs with --seed 7"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::set<int> only;
  fs::path work;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::cerr << "usage: phasecast_acceptance [--cli PATH] [--only 1,2,...] [--work DIR]\n";
      return 2;
    }
  }
  std::optional<testing::TempDir> temp;
  if (work.empty()) {
    temp.emplace("acceptance");
    work = temp->path();
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"gumbel-softmax contract", gumbel_contract},
      {"EM correctness", em_correctness},
      {"metric oracles", metric_oracles},
      {"baseline ordering", baseline_ordering},
      {"horizon trends", horizon_trends},
      {"ablation wiring", [&] { return ablation_wiring(work); }},
      {"pretraining sanity", pretraining_sanity},
      {"reproducibility", [&] { return reproducibility(work, cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
