#pragma once

#include <cstddef>

namespace phasecast::seq {

struct ModelConfig {
  std::size_t n_phases = 7;
  std::size_t hidden = 32;
  std::size_t feature_dim = 16;
  std::size_t noise_dim = 8;
  std::size_t t_past = 15;    // frames at 1 fps
  std::size_t t_future = 15;  // frames at 1 fps
  double gumbel_tau = 1.0;

  // Throws ValidationError naming the first offending field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace phasecast::seq
