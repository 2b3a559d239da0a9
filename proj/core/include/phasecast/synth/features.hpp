#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "phasecast/diff/tensor.hpp"
#include "phasecast/random.hpp"
#include "phasecast/synth/workflow.hpp"

namespace phasecast::synth {

// n_phases orthonormal prototype rows in R^feature_dim. Fixed for a given
// (n_phases, feature_dim); requires feature_dim >= n_phases.
diff::Tensor phase_prototypes(std::size_t n_phases, std::size_t feature_dim);

// Frame t = prototype of the (optionally confused) phase + N(0, sigma^2 I).
// `confusion`, when given, is an n_phases x n_phases row-stochastic matrix:
// the displayed phase is drawn from row labels[t].
diff::Tensor emit_features(const PhaseSequence& seq, std::size_t n_phases, std::size_t feature_dim,
                           double noise_sigma, const std::optional<diff::Tensor>& confusion, Rng& rng);

// Label of the closest prototype per frame (lowest index on ties).
std::vector<int> nearest_prototype(const diff::Tensor& features, const diff::Tensor& prototypes);

}  // namespace phasecast::synth
