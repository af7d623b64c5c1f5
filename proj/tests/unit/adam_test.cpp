#include "nfship/ad/adam.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "nfship/common.hpp"

namespace nfship::ad {
namespace {

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> s;
  auto& p = s.add("x", Tensor<double>({2}, {1.0, -1.0}));
  p.grad = Tensor<double>({2}, {0.3, -5.0});
  Adam<double> adam({0.01});
  adam.step(s);
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value[1], -1.0 + 0.01, 1e-9);
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ParamStore<double> s;
  auto& p = s.add("x", Tensor<double>({1}, {0.5}));
  Adam<double> adam({0.05, 0.9, 0.999, 1e-8});
  double x = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 50; ++t) {
    const double g = std::sin(t) + 2 * x;
    p.grad = Tensor<double>({1}, {g});
    adam.step(s);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    ASSERT_NEAR(p.value[0], x, 1e-12) << t;
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamStore<double> s;
  auto& p = s.add("x", Tensor<double>({3}, {1, 2, 3}));
  p.grad = Tensor<double>({3}, 0.0);
  Adam<double> adam;
  for (int i = 0; i < 10; ++i) adam.step(s);
  EXPECT_EQ(p.value.to_vector(), (std::vector<double>{1, 2, 3}));
}

TEST(Adam, ConstantGradientMovesAgainstItsSign) {
  ParamStore<double> s;
  auto& p = s.add("x", Tensor<double>({2}, {0.0, 0.0}));
  Adam<double> adam({0.01});
  for (int i = 0; i < 100; ++i) {
    p.grad = Tensor<double>({2}, {2.0, -0.5});
    adam.step(s);
  }
  EXPECT_LT(p.value[0], -0.5);
  EXPECT_GT(p.value[1], 0.5);
}

TEST(Adam, QuadraticBowlConverges) {
  ParamStore<double> s;
  auto& p = s.add("x", Tensor<double>({2}, {3.0, -4.0}));
  Adam<double> adam({1e-2});
  for (int i = 0; i < 2000; ++i) {
    p.grad = Tensor<double>({2}, {2 * p.value[0], 2 * p.value[1]});
    adam.step(s);
  }
  EXPECT_LT(std::hypot(p.value[0], p.value[1]), 1e-3);
}

TEST(Adam, NonFiniteGradientThrowsBeforeAnyUpdate) {
  ParamStore<double> s;
  auto& a = s.add("a", Tensor<double>({1}, {1.0}));
  auto& b = s.add("b", Tensor<double>({1}, {2.0}));
  a.grad = Tensor<double>({1}, {1.0});
  b.grad = Tensor<double>({1}, {std::nan("")});
  Adam<double> adam;
  EXPECT_THROW(adam.step(s), NumericError);
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 2.0);
}

TEST(Adam, NonTrainableParametersAreSkipped) {
  ParamStore<double> s;
  auto& buf = s.add("running_mean", Tensor<double>({1}, {0.5}), false);
  buf.grad = Tensor<double>({1}, {1.0});
  Adam<double> adam({0.1});
  adam.step(s);
  EXPECT_EQ(buf.value[0], 0.5);
}

}  // namespace
}  // namespace nfship::ad
