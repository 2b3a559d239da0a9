#include "phasecast/seq/config.hpp"

#include "phasecast/error.hpp"

namespace phasecast::seq {

void ModelConfig::validate() const {
  if (n_phases < 2) throw ValidationError("model: n_phases must be >= 2");
  if (hidden < 1) throw ValidationError("model: hidden must be >= 1");
  if (feature_dim < 1) throw ValidationError("model: feature_dim must be >= 1");
  if (noise_dim < 1) throw ValidationError("model: noise_dim must be >= 1");
  if (t_past < 1) throw ValidationError("model: t_past must be >= 1");
  if (t_future < 1) throw ValidationError("model: t_future must be >= 1");
  if (!(gumbel_tau > 0.0)) throw ValidationError("model: gumbel_tau must be > 0");
}

}  // namespace phasecast::seq
