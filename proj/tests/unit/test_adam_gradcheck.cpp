#include <cmath>

#include <gtest/gtest.h>

#include "phasecast/diff/adam.hpp"
#include "phasecast/diff/grad_check.hpp"
#include "phasecast/error.hpp"
#include "test_util.hpp"

namespace phasecast::diff {
namespace {

// Plain scalar Adam recurrence, kept independent of the library code.
double reference_adam(double x, double g, int steps, double lr) {
  double m = 0, v = 0;
  for (int t = 1; t <= steps; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  return x;
}

TEST(Adam, FirstStepMovesByLrTimesSign) {
  for (double g : {3.0, -0.02, 1e-3}) {
    Tensor p = Tensor::scalar(1.0);
    std::vector<Tensor*> ps{&p};
    AdamState st = AdamState::zeros_like(ps);
    adam_step(ps, std::vector<Tensor>{Tensor::scalar(g)}, st, 0.01);
    EXPECT_NEAR(p.item(), 1.0 - 0.01 * (g > 0 ? 1 : -1), 1e-7);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = Tensor::row({1, -2, 3});
  std::vector<Tensor*> ps{&p};
  AdamState st = AdamState::zeros_like(ps);
  adam_step(ps, std::vector<Tensor>{Tensor::zeros(1, 3)}, st, 0.1);
  EXPECT_EQ(p, Tensor::row({1, -2, 3}));
}

TEST(Adam, TwoStepsOnConstantGradientMatchRecurrence) {
  Tensor p = Tensor::scalar(0.0);
  std::vector<Tensor*> ps{&p};
  AdamState st = AdamState::zeros_like(ps);
  adam_step(ps, std::vector<Tensor>{Tensor::scalar(1.0)}, st, 0.1);
  const double after_one = p.item();
  adam_step(ps, std::vector<Tensor>{Tensor::scalar(1.0)}, st, 0.1);
  EXPECT_LT(after_one, 0.0);
  EXPECT_LT(p.item(), after_one);
  EXPECT_NEAR(after_one, reference_adam(0.0, 1.0, 1, 0.1), 1e-15);
  EXPECT_NEAR(p.item(), reference_adam(0.0, 1.0, 2, 0.1), 1e-15);
  // Frozen: bias correction makes both steps lr / (1 + 1e-8).
  EXPECT_NEAR(p.item(), -0.199999998, 1e-12);
}

TEST(Adam, ZeroLearningRateIsBitwiseNoOp) {
  Rng rng(11);
  Tensor a = testing::random_tensor(3, 3, rng), b = testing::random_tensor(1, 5, rng);
  const Tensor a0 = a, b0 = b;
  std::vector<Tensor*> ps{&a, &b};
  AdamState st = AdamState::zeros_like(ps);
  for (int i = 0; i < 3; ++i) {
    adam_step(ps, std::vector<Tensor>{testing::random_tensor(3, 3, rng), testing::random_tensor(1, 5, rng)}, st, 0.0);
  }
  EXPECT_EQ(a, a0);
  EXPECT_EQ(b, b0);
}

TEST(Adam, NonFiniteGradientThrowsWithoutMutation) {
  Tensor a = Tensor::row({1, 2}), b = Tensor::row({3});
  std::vector<Tensor*> ps{&a, &b};
  AdamState st = AdamState::zeros_like(ps);
  EXPECT_THROW(adam_step(ps, std::vector<Tensor>{Tensor::row({0.5, 0.5}), Tensor::row({INFINITY})}, st, 0.1),
               NonFiniteError);
  EXPECT_EQ(a, Tensor::row({1, 2}));
  EXPECT_EQ(st.step, 0u);
  EXPECT_EQ(st.first_moment[0], Tensor::zeros(1, 2));
}

TEST(Adam, RejectsMismatchedShapesAndNegativeLr) {
  Tensor a = Tensor::row({1, 2});
  std::vector<Tensor*> ps{&a};
  AdamState st = AdamState::zeros_like(ps);
  EXPECT_THROW(adam_step(ps, std::vector<Tensor>{Tensor::row({1})}, st, 0.1), ShapeError);
  EXPECT_THROW(adam_step(ps, std::vector<Tensor>{Tensor::row({1, 1})}, st, -0.1), ValidationError);
}

TEST(GradCheck, SumOfSquares) {
  const double err = grad_check([](Tape&, Var x) { return sum(mul(x, x)); }, Tensor::row({1, 2, 3}), 1e-5);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  Rng rng(5);
  const Tensor logits = testing::random_tensor(1, 5, rng);
  const Tensor target = Tensor::row({0, 0, 1, 0, 0});
  const double err = grad_check(
      [&](Tape& t, Var x) { return scale(sum(mul(log_softmax(x), t.constant(target))), -1.0); }, logits, 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const double err = grad_check([](Tape& t, Var) { return t.constant(Tensor::scalar(4.0)); }, Tensor::row({1, 2}), 1e-5);
  EXPECT_EQ(err, 0.0);
}

TEST(GradCheck, NonFiniteFunctionValueIsAnError) {
  EXPECT_THROW(grad_check([](Tape&, Var x) { return sum(log(x)); }, Tensor::row({1e-7, 1.0}), 1e-5), NonFiniteError);
}

}  // namespace
}  // namespace phasecast::diff
