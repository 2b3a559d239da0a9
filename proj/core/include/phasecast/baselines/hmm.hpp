#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "phasecast/diff/tensor.hpp"

namespace phasecast::baselines {

// Discrete-state HMM whose observations are per-frame state likelihoods
// supplied from outside (the encoder's softmax rows). An optional
// row-stochastic confusion matrix B mixes them: the emission weight of
// state i at frame t is sum_k B[i][k] * L_t[k].
struct HmmParams {
  diff::Tensor initial;     // 1 x N
  diff::Tensor transition;  // N x N, row-stochastic
  std::optional<diff::Tensor> confusion;

  std::size_t n_states() const { return transition.rows(); }
  void validate() const;  // stochasticity within 1e-9, non-negative entries

  friend bool operator==(const HmmParams&, const HmmParams&) = default;
};

struct ForwardResult {
  diff::Tensor posteriors;  // T x N filtered posteriors p(state_t | obs_1..t)
  double log_likelihood = 0.0;
};

// Scaled forward recursion. Throws ValidationError on negative entries, on an
// all-zero likelihood row, or when a frame has zero probability under params.
ForwardResult hmm_forward(const diff::Tensor& likelihoods, const HmmParams& params);

struct BaumWelchOptions {
  std::size_t iterations = 50;
  std::uint64_t seed = 0;           // used by random_init
  bool learn_confusion = false;
  bool random_init = false;         // random transition rows instead of count-based init
  double smoothing = 1e-3;          // added to empirical transition counts
  std::optional<HmmParams> initial; // overrides both initialisations
};

struct BaumWelchResult {
  HmmParams params;
  // log_likelihoods[k] is the total log-likelihood under the parameters after
  // k updates (entry 0 is the initialisation).
  std::vector<double> log_likelihoods;
};

// EM over all sequences jointly. Requires at least one sequence of length >= 2.
BaumWelchResult hmm_baum_welch(std::span<const diff::Tensor> sequences, std::size_t n_states,
                               const BaumWelchOptions& options = {});

// Propagates p <- p A once per future step and emits argmax (lowest index on
// ties) after each step.
std::vector<int> hmm_predict(std::span<const double> posterior, const diff::Tensor& transition, std::size_t t_future);

// Filters softmax(past_logits) and rolls the final posterior forward.
std::vector<int> hmm_forecast(const diff::Tensor& past_logits, const HmmParams& params, std::size_t t_future);

// Repeats the argmax of the last past logit row.
std::vector<int> constant_predict(const diff::Tensor& past_logits, std::size_t t_future);

// Text format, version 1:
//   phasecast-hmm 1
//   n_states <N>
//   initial
//   <N values>
//   transition
//   <N rows of N values>
//   [confusion
//   <N rows of N values>]
//   end
void write_hmm(std::ostream& os, const HmmParams& params);
HmmParams read_hmm(std::istream& is);
void save_hmm(const std::filesystem::path& path, const HmmParams& params);
HmmParams load_hmm(const std::filesystem::path& path);

}  // namespace phasecast::baselines
