#include "phasecast/diff/adam.hpp"

#include <cmath>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::diff {

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.first_moment.push_back(Tensor::zeros_like(*p));
    s.second_moment.push_back(Tensor::zeros_like(*p));
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               const AdamConfig& config) {
  if (!(lr >= 0.0)) throw ValidationError("adam_step: learning rate must be non-negative");
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k].same_shape(*params[k]) || !state.first_moment[k].same_shape(*params[k]) ||
        !state.second_moment[k].same_shape(*params[k])) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(k) + " " +
                       shape_str(params[k]->shape()) + " vs gradient " + shape_str(grads[k].shape()));
    }
    if (!grads[k].all_finite()) {
      throw NonFiniteError("adam_step: non-finite gradient for parameter " + std::to_string(k));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
}

}  // namespace phasecast::diff
