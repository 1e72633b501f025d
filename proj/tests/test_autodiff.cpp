#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "reldec/autodiff.hpp"
#include "test_support.hpp"

using namespace reldec;
using reldec::testing::max_relative_error;
using reldec::testing::numeric_gradient;
using reldec::testing::random_tensor;

namespace {

using Builder = std::function<ad::Var(const std::vector<ad::Var>&)>;

// Reduces any output to a scalar with fixed random weights, then compares
// backprop gradients of every input against central differences.
double worst_gradient_error(const Builder& build, std::vector<Tensor> inputs, std::uint64_t seed = 1) {
  Tensor probe;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    std::mt19937_64 rng(seed);
    probe = random_tensor(build(vars).shape(), rng);
  }
  auto scalar_of = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    ad::Var out = build(vars);
    ad::Var w = tape.constant(probe);
    if (out.size() == 1) return ad::scale(out, probe[0]);
    return ad::sum(ad::mul(out, w));
  };

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  auto grads = tape.gradients(scalar_of(tape, vars), vars);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& x) {
      ad::Tape t2;
      std::vector<ad::Var> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j) vs.push_back(t2.constant(j == k ? x : inputs[j]));
      return scalar_of(t2, vs).value()[0];
    };
    worst = std::max(worst, max_relative_error(grads[k], numeric_gradient(f, inputs[k], 1e-5)));
  }
  return worst;
}

std::mt19937_64 rng(42);

Tensor rnd(std::vector<std::size_t> shape) { return random_tensor(std::move(shape), rng); }

}  // namespace

TEST(AutodiffGradients, ElementwiseOps) {
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::add(v[0], v[1]); }, {rnd({4}), rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::sub(v[0], v[1]); }, {rnd({4}), rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::mul(v[0], v[1]); }, {rnd({4}), rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::scale(v[0], -2.5); }, {rnd({3, 2})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::tanh(v[0]); }, {rnd({5})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::sigmoid(v[0]); }, {rnd({5})}), 1e-6);
}

TEST(AutodiffGradients, LinearAlgebra) {
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::matvec(v[0], v[1]); }, {rnd({3, 4}), rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::affine(v[0], v[1], v[2]); },
                                 {rnd({3, 4}), rnd({4}), rnd({3})}),
            1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::matmul(v[0], v[1]); }, {rnd({2, 3}), rnd({3, 4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::dot(v[0], v[1]); }, {rnd({6}), rnd({6})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::sum(v[0]); }, {rnd({2, 3})}), 1e-6);
}

TEST(AutodiffGradients, Structural) {
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::concat({v[0], v[1]}); }, {rnd({2}), rnd({3})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::slice(v[0], 1, 3); }, {rnd({5})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::row_select(v[0], 2); }, {rnd({3, 4})}), 1e-6);
  EXPECT_LT(worst_gradient_error(
                [](auto& v) {
                  const std::size_t idx[] = {2, 0, 2};
                  return ad::gather_rows(v[0], idx);
                },
                {rnd({3, 4})}),
            1e-6);
  EXPECT_LT(worst_gradient_error(
                [](auto& v) {
                  std::vector<ad::Var> rows{v[0], v[1]};
                  return ad::stack_rows(rows);
                },
                {rnd({3}), rnd({3})}),
            1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::add_rowwise(v[0], v[1]); }, {rnd({3, 4}), rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::weighted_row_sum(v[0], v[1]); }, {rnd({3}), rnd({3, 4})}),
            1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::pick(v[0], 1); }, {rnd({4})}), 1e-6);
  EXPECT_LT(worst_gradient_error(
                [](auto& v) {
                  std::vector<ad::Var> s{ad::pick(v[0], 0), ad::pick(v[0], 2), ad::pick(v[1], 1)};
                  return ad::add_n(s);
                },
                {rnd({3}), rnd({2})}),
            1e-6);
}

TEST(AutodiffGradients, Normalizers) {
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::softmax(v[0]); }, {rnd({5})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::log_softmax(v[0]); }, {rnd({5})}), 1e-6);
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::softmax_rows(v[0]); }, {rnd({3, 4})}), 1e-6);
}

TEST(AutodiffGradients, SharedSubexpressionAccumulates) {
  // f(x) = sum(x * x) + sum(tanh(x)) reuses x on several paths.
  EXPECT_LT(worst_gradient_error([](auto& v) { return ad::add(ad::sum(ad::mul(v[0], v[0])), ad::sum(ad::tanh(v[0]))); },
                                 {rnd({4})}),
            1e-6);
}

TEST(AutodiffValues, SoftmaxClosedForm) {
  const double in[] = {std::log(1.0), std::log(2.0), std::log(3.0)};
  const auto p = ad::softmax_values(in);
  EXPECT_NEAR(p[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(p[2], 3.0 / 6.0, 1e-15);
}

TEST(AutodiffValues, LogSoftmaxIsStableForLargeInputs) {
  const double in[] = {1000.0, 0.0};
  const auto lp = ad::log_softmax_values(in);
  EXPECT_NEAR(lp[0], -std::log1p(std::exp(-1000.0)), 1e-15);
  EXPECT_NEAR(lp[1], -1000.0, 1e-12);
}

TEST(AutodiffValues, SigmoidOfLargeMagnitudesIsFinite) {
  ad::Tape tape;
  auto s = ad::sigmoid(tape.constant(Tensor::vector({-800.0, 800.0})));
  EXPECT_EQ(s.value()[0], 0.0);
  EXPECT_EQ(s.value()[1], 1.0);
}

TEST(AutodiffErrors, ShapeMismatchNamesBothShapes) {
  ad::Tape tape;
  auto a = tape.constant(Tensor({2}));
  auto b = tape.constant(Tensor({3}));
  try {
    ad::add(a, b);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2]"), std::string::npos);
    EXPECT_NE(msg.find("[3]"), std::string::npos);
  }
}

TEST(AutodiffErrors, BackwardNeedsScalar) {
  ad::Tape tape;
  auto a = tape.variable(Tensor({2}));
  EXPECT_THROW(tape.backward(a), std::invalid_argument);
}

TEST(AutodiffErrors, NonFiniteOutputIsRejected) {
  ad::Tape tape;
  auto a = tape.constant(Tensor::vector({1e300}));
  EXPECT_THROW(ad::mul(a, a), std::domain_error);
}

TEST(AutodiffErrors, MixingTapesIsRejected) {
  ad::Tape t1, t2;
  EXPECT_THROW(ad::add(t1.constant(Tensor({2})), t2.constant(Tensor({2}))), std::invalid_argument);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  ad::Tape tape;
  auto c = tape.constant(Tensor::vector({1, 2}));
  auto v = tape.variable(Tensor::vector({3, 4}));
  auto loss = ad::sum(ad::mul(c, v));
  EXPECT_FALSE(tape.requires_grad(c));
  tape.backward(loss);
  EXPECT_EQ(tape.grad(v), Tensor::vector({1, 2}));
  EXPECT_EQ(tape.grad(c), Tensor({2}));
}

TEST(Autodiff, ValuesStayValidAsTapeGrows) {
  ad::Tape tape;
  auto a = tape.constant(Tensor::vector({1, 2, 3}));
  const Tensor& ref = a.value();
  for (int i = 0; i < 5000; ++i) ad::scale(a, 2.0);
  EXPECT_EQ(ref[2], 3.0);
}
