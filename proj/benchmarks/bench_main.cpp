#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "phasecast/baselines/hmm.hpp"
#include "phasecast/diff/tape.hpp"
#include "phasecast/metrics/metrics.hpp"
#include "phasecast/seq/generator.hpp"
#include "phasecast/seq/lstm.hpp"

using namespace phasecast;
using diff::Tensor;

namespace {

Tensor noise(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t = Tensor::zeros(r, c);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = noise(n, n, rng), b = noise(n, n, rng);
  for (auto _ : state) {
    diff::Tape t;
    const auto x = t.leaf(a);
    const auto loss = diff::sum(diff::matmul(x, t.leaf(b)));
    benchmark::DoNotOptimize(t.backward(loss));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64);

void BM_LstmStep(benchmark::State& state) {
  const std::size_t hidden = static_cast<std::size_t>(state.range(0)), batch = 8;
  Rng rng(2);
  const auto w = seq::LstmWeights::init(16, hidden, rng);
  const Tensor x = noise(batch, 16, rng);
  for (auto _ : state) {
    diff::Tape t;
    const auto vars = seq::bind(t, w, true);
    const auto s = seq::lstm_cell(t.constant(x), seq::zero_state(t, batch, hidden), vars);
    benchmark::DoNotOptimize(t.backward(diff::sum(s.h)));
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(64);

void BM_Levenshtein(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::uniform_int_distribution<int> d(0, 11);
  std::vector<int> a(n), b(n);
  for (auto& v : a) v = d(rng);
  for (auto& v : b) v = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(15)->Arg(45);

void BM_HmmForward(benchmark::State& state) {
  const std::size_t n = 12, len = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  baselines::HmmParams p;
  p.initial = Tensor::filled(1, n, 1.0 / n);
  p.transition = Tensor::filled(n, n, 1.0 / n);
  Tensor lik = noise(len, n, rng);
  for (auto& v : lik.values()) v = v * v + 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(baselines::hmm_forward(lik, p));
}
BENCHMARK(BM_HmmForward)->Arg(15)->Arg(1000);

void BM_GeneratorPredict(benchmark::State& state) {
  seq::ModelConfig cfg;
  cfg.n_phases = 12;
  Rng rng(5);
  const auto params = seq::GeneratorParams::init(cfg, rng);
  const Tensor window = noise(cfg.t_past, cfg.feature_dim, rng);
  for (auto _ : state) benchmark::DoNotOptimize(seq::predict_one(params, cfg, window, 10, rng));
}
BENCHMARK(BM_GeneratorPredict);

}  // namespace
BENCHMARK_MAIN();
