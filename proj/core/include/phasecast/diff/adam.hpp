#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phasecast/diff/tensor.hpp"

namespace phasecast::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const Tensor* const> params);
};

// One bias-corrected Adam update, in place. Throws NonFiniteError (and leaves
// params and state untouched) if any gradient entry is not finite.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               const AdamConfig& config = {});

}  // namespace phasecast::diff
