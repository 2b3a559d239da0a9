#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "phasecast/diff/tape.hpp"

namespace phasecast::diff {

using ScalarFn = std::function<Var(Tape&, Var)>;
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;  // which tensor
  std::size_t worst_index = 0;  // flat index inside it
  double analytic = 0.0;
  double numeric = 0.0;
};

// Max over coordinates of |analytic - numeric| / max(1, |numeric|), with
// numeric derivatives from central differences of step eps.
double grad_check(const ScalarFn& f, const Tensor& x, double eps);

// Same measure over several inputs at once; `f` receives one leaf per input.
GradCheckResult grad_check(const MultiScalarFn& f, std::span<const Tensor> xs, double eps);

}  // namespace phasecast::diff
