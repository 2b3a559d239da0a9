#include "phasecast/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "phasecast/error.hpp"

namespace phasecast::diff {
namespace {

double evaluate(const MultiScalarFn& f, std::span<const Tensor> xs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(xs.size());
  for (const Tensor& x : xs) leaves.push_back(tape.leaf(x));
  const double v = f(tape, leaves).value().item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const MultiScalarFn& f, std::span<const Tensor> xs, double eps) {
  if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& x : xs) leaves.push_back(tape.leaf(x));
    const Var out = f(tape, leaves);
    if (!std::isfinite(out.value().item())) throw NonFiniteError("grad_check: function value is not finite");
    const Gradients g = tape.backward(out);
    for (const Var& l : leaves) analytic.push_back(g.of(l));
  }

  GradCheckResult res;
  std::vector<Tensor> probe(xs.begin(), xs.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double up = evaluate(f, probe);
      probe[k][i] = orig - eps;
      const double down = evaluate(f, probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > res.max_rel_error || (k == 0 && i == 0)) {
        res = GradCheckResult{err, k, i, analytic[k][i], numeric};
      }
    }
  }
  return res;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  const MultiScalarFn wrapped = [&f](Tape& tape, std::span<const Var> leaves) { return f(tape, leaves[0]); };
  return grad_check(wrapped, std::span<const Tensor>(&x, 1), eps).max_rel_error;
}

}  // namespace phasecast::diff
