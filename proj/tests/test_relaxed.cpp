#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "reldec/relaxed.hpp"
#include "test_support.hpp"

using namespace reldec;
using namespace reldec::testing;

namespace {

constexpr std::size_t kSrc = 9, kTgt = 8;

const ModelParams& l2r() {
  static const ModelParams m = tiny_model(kSrc, kTgt, 11, 0.8);
  return m;
}
const ModelParams& r2l() {
  static const ModelParams m = tiny_model(kSrc, kTgt, 12, 0.8, Direction::kRightToLeft);
  return m;
}
const ModelParams& t2s() {
  static const ModelParams m = tiny_model(kTgt, kSrc, 13, 0.8, Direction::kLeftToRight, Side::kTargetToSource);
  return m;
}

ObjectiveSpec single(TokenIds x) { return {ObjectiveKind::kSingle, 0.5, &l2r(), nullptr, std::move(x)}; }

std::vector<ObjectiveSpec> all_kinds(const TokenIds& x) {
  return {single(x), {ObjectiveKind::kBidirectional, 0.5, &l2r(), &r2l(), x},
          {ObjectiveKind::kBilingual, 0.5, &l2r(), &t2s(), x}};
}

Tensor rows_of(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor::matrix(r, c, std::move(v)); }

}  // namespace

TEST(EgStep, HandComputedUpdate) {
  const Tensor y = eg_step(rows_of(1, 2, {0.5, 0.5}), rows_of(1, 2, {0.0, std::log(4.0)}), 1.0);
  EXPECT_NEAR(y[0], 0.8, 1e-15);
  EXPECT_NEAR(y[1], 0.2, 1e-15);
}

TEST(EgStep, ZeroGradientIsAFixedPoint) {
  std::mt19937_64 rng(1);
  const Tensor y = random_simplex(3, 5, rng);
  const Tensor z = eg_step(y, Tensor({3, 5}), 7.0);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(z[k], y[k], 1e-15);
}

TEST(EgStep, InvariantToPerRowGradientShift) {
  std::mt19937_64 rng(2);
  const Tensor y = random_simplex(3, 5, rng);
  const Tensor g = random_tensor({3, 5}, rng);
  Tensor shifted = g;
  for (std::size_t i = 0; i < 3; ++i)
    for (double& v : shifted.row(i)) v += 3.0 * static_cast<double>(i) - 1.0;
  const Tensor a = eg_step(y, g, 2.0), b = eg_step(y, shifted, 2.0);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(EgStep, StaysOnSimplexUnderHugeSteps) {
  std::mt19937_64 rng(3);
  const Tensor y = random_simplex(4, 6, rng);
  const Tensor z = eg_step(y, random_tensor({4, 6}, rng, -50, 50), 1e3);
  EXPECT_NO_THROW(check_simplex_rows(z));
  EXPECT_THROW(eg_step(y, rows_of(1, 2, {0.5, 0.5}), 1.0), std::invalid_argument);
  Tensor bad = Tensor({4, 6});
  bad.data()[0] = INFINITY;
  EXPECT_THROW(eg_step(y, bad, 1.0), std::domain_error);
}

TEST(Momentum, FoldArithmetic) {
  EXPECT_DOUBLE_EQ(momentum_fold(Tensor::vector({1.0}), Tensor::vector({1.0}), 0.9, 2.0)[0], 2.9);
  EXPECT_DOUBLE_EQ(momentum_fold(Tensor::vector({5.0}), Tensor::vector({1.0}), 0.0, 2.0)[0], 2.0);
  // With no fresh gradient the velocity decays geometrically.
  Tensor v = Tensor::vector({1.0});
  for (int t = 0; t < 5; ++t) v = momentum_fold(v, Tensor::vector({0.0}), 0.5, 1.0);
  EXPECT_DOUBLE_EQ(v[0], 1.0 / 32.0);
}

TEST(Sgd, LogitGradientRowsSumToZero) {
  std::mt19937_64 rng(4);
  const LogitCostGrad cg = logit_cost_grad(single({4, 5}), random_tensor({3, kTgt}, rng));
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (double v : cg.grad.row(i)) s += v;
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(Sgd, LogitGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const TokenIds x{4, 6};
  for (const ObjectiveSpec& s : all_kinds(x)) {
    const Tensor r = random_tensor({3, kTgt}, rng);
    const Tensor numeric =
        numeric_gradient([&](const Tensor& z) { return relaxed_cost(s, softmax_rows(z)); }, r, 1e-5);
    EXPECT_LT(max_relative_error(logit_cost_grad(s, r).grad, numeric), 1e-5) << objective_name(s.kind);
  }
}

TEST(Sgd, StepSubtractsScaledGradient) {
  std::mt19937_64 rng(6);
  const Tensor r = random_tensor({2, kTgt}, rng);
  const Tensor g = logit_cost_grad(single({4}), r).grad;
  const Tensor next = sgd_step(r, single({4}), 0.5);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(next[k], r[k] - 0.5 * g[k], 1e-15);
}

TEST(Sgd, SoftmaxRowsIsShiftInvariant) {
  const Tensor a = softmax_rows(rows_of(1, 3, {1.0, 2.0, 3.0}));
  const Tensor b = softmax_rows(rows_of(1, 3, {101.0, 102.0, 103.0}));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
}

TEST(Rounding, ArgmaxWithLowestIndexTies) {
  EXPECT_EQ(round_solution(rows_of(1, 2, {0.3, 0.7})), (TokenIds{1}));
  EXPECT_EQ(round_solution(rows_of(1, 2, {0.5, 0.5})), (TokenIds{0}));
}

TEST(Rounding, CutsAfterFirstEos) {
  const TokenIds y{4, kEos, 5, kEos};
  EXPECT_EQ(round_solution(one_hot_rows(y, kTgt)), (TokenIds{4, kEos}));
  const TokenIds z{4, 6, 5, kEos};
  EXPECT_EQ(round_solution(one_hot_rows(z, kTgt)), z);
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy_diagnostic(rows_of(1, 2, {0.8, 0.2})), 0.5004024235381879, 1e-12);
  Tensor u({3, 4});
  for (double& v : u.data()) v = 0.25;
  EXPECT_NEAR(entropy_diagnostic(u), 3 * std::log(4.0), 1e-12);
  EXPECT_EQ(entropy_diagnostic(one_hot_rows(TokenIds{4, 5}, kTgt)), 0.0);
}

TEST(Init, UniformRowsAndLength) {
  EXPECT_EQ(uniform_length(5), 7u);
  OptimConfig c;
  c.init = InitKind::kUniform;
  c.length = 3;
  const Initialization init = init_relaxed(single({4, 5}), c);
  EXPECT_TRUE(init.tokens.empty());
  ASSERT_EQ(init.rows.shape_string(), "[3x8]");
  for (double v : init.rows.data()) EXPECT_EQ(v, 0.125);
  c.algorithm = Algorithm::kSGD;
  const Initialization logits = init_relaxed(single({4, 5}), c);
  for (double v : logits.rows.data()) EXPECT_EQ(v, 0.0);
}

TEST(Init, GreedyRowsRoundToGreedyOutput) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const TokenIds x = random_tokens(2 + i % 3, kSrc, rng);
    for (const ModelParams* m : {&l2r(), &r2l()}) {
      OptimConfig c;
      const Initialization init = init_relaxed({ObjectiveKind::kSingle, 0.5, m, nullptr, x}, c);
      EXPECT_EQ(round_solution(init.rows), init.tokens);
      EXPECT_EQ(to_model_order(*m, init.tokens), greedy_decode(*m, x, default_max_length(x.size())).tokens);
    }
  }
}

TEST(Init, RerankUsesObjectiveScorers) {
  OptimConfig c;
  c.init = InitKind::kRerank;
  const TokenIds x{4, 7, 5};
  const ObjectiveSpec s = all_kinds(x)[2];
  const Initialization init = init_relaxed(s, c);
  BeamOptions o{5, default_max_length(x.size()), 5};
  NBestList n = beam_decode(l2r(), x, o);
  const RerankResult r = rerank(n, x, objective_scorers(s));
  EXPECT_EQ(init.tokens, r.best.tokens);
}

TEST(Decode, NeverWorseThanInitializer) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 6; ++i) {
    const TokenIds x = random_tokens(2 + i % 3, kSrc, rng);
    for (const ObjectiveSpec& s : all_kinds(x)) {
      OptimConfig c;
      c.max_iter = 20;
      const DecodeResult r = relaxed_decode(s, c);
      EXPECT_LE(r.cost, r.init_cost);
      EXPECT_LE(r.discrete_cost, r.init_discrete_cost);
      EXPECT_EQ(r.trace.size(), r.iterations + 1);
      EXPECT_DOUBLE_EQ(r.cost, r.trace[r.best_iteration].cost);
      EXPECT_NEAR(r.discrete_cost, discrete_cost(s, r.tokens), 1e-12);
    }
  }
}

TEST(Decode, EveryIterateIsOnTheSimplex) {
  std::mt19937_64 rng(9);
  for (Algorithm a : {Algorithm::kEG, Algorithm::kSGD}) {
    const TokenIds x = random_tokens(4, kSrc, rng);
    OptimConfig c;
    c.algorithm = a;
    c.max_iter = 30;
    std::size_t seen = 0;
    relaxed_decode(all_kinds(x)[1], c, [&](std::size_t, const RelaxedSequence& y) {
      EXPECT_NO_THROW(check_simplex_rows(y, 1e-9));
      ++seen;
    });
    EXPECT_GE(seen, 2u);
  }
}

TEST(Decode, SmallFirstStepDecreasesCost) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 20; ++i) {
    const TokenIds x = random_tokens(1 + i % 4, kSrc, rng);
    const ObjectiveSpec s = all_kinds(x)[i % 3];
    const Tensor y = random_simplex(3, kTgt, rng);
    const CostGrad cg = relaxed_cost_grad(s, y);
    EXPECT_LT(relaxed_cost(s, eg_step(y, cg.grad, 1e-3)), cg.cost);
  }
}

TEST(Decode, MatchesUnrolledRecurrence) {
  const TokenIds x{4, 6, 5};
  for (const ObjectiveSpec& s : all_kinds(x)) {
    OptimConfig c;
    c.init = InitKind::kUniform;
    c.eta = 3.0;
    c.momentum = 0.7;
    c.anneal = 0.9;
    c.max_iter = 8;
    c.tolerance = 0.0;
    std::vector<Tensor> iterates;
    const DecodeResult r = relaxed_decode(s, c, [&](std::size_t, const RelaxedSequence& y) { iterates.push_back(y); });
    ASSERT_EQ(iterates.size(), 9u);

    Tensor y = init_relaxed(s, c).rows;
    Tensor v = Tensor::zeros_like(y);
    double eta = c.eta;
    for (std::size_t t = 0; t <= c.max_iter; ++t) {
      for (std::size_t k = 0; k < y.size(); ++k) ASSERT_NEAR(iterates[t][k], y[k], 1e-12);
      EXPECT_NEAR(r.trace[t].cost, relaxed_cost(s, y), 1e-10);
      const Tensor g = relaxed_grad(s, y);
      for (std::size_t k = 0; k < v.size(); ++k) v.data()[k] = c.momentum * v[k] + eta * g[k];
      Tensor next = y;
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double z = 0.0;
        for (std::size_t w = 0; w < y.cols(); ++w) z += next.row(i)[w] = y.row(i)[w] * std::exp(-v.row(i)[w]);
        for (double& e : next.row(i)) e /= z;
      }
      y = next;
      eta *= c.anneal;
    }
  }
}

TEST(Decode, SgdMatchesUnrolledRecurrence) {
  const ObjectiveSpec s = single({5, 4});
  OptimConfig c;
  c.algorithm = Algorithm::kSGD;
  c.init = InitKind::kGreedy;
  c.eta = 2.0;
  c.momentum = 0.0;
  c.max_iter = 5;
  c.tolerance = 0.0;
  std::vector<Tensor> iterates;
  relaxed_decode(s, c, [&](std::size_t, const RelaxedSequence& y) { iterates.push_back(y); });
  Tensor r = init_relaxed(s, c).rows;
  for (std::size_t t = 0; t <= c.max_iter; ++t) {
    const Tensor y = softmax_rows(r);
    for (std::size_t k = 0; k < y.size(); ++k) ASSERT_NEAR(iterates[t][k], y[k], 1e-12);
    r = sgd_step(r, s, c.eta);
  }
}

TEST(Decode, ZeroOutputLayerCostIsLengthTimesLogVocab) {
  ModelParams flat = l2r();
  flat.out_w = Tensor::zeros_like(flat.out_w);
  flat.out_b = Tensor::zeros_like(flat.out_b);
  std::mt19937_64 rng(11);
  const ObjectiveSpec s{ObjectiveKind::kSingle, 0.5, &flat, nullptr, {4, 5}};
  EXPECT_NEAR(relaxed_cost(s, random_simplex(5, kTgt, rng)), 5 * std::log(8.0), 1e-12);
  OptimConfig c;
  c.max_iter = 3;
  c.init = InitKind::kUniform;
  c.length = 4;
  for (const auto& row : relaxed_decode(s, c).trace) EXPECT_NEAR(row.cost, 4 * std::log(8.0), 1e-12);
}

TEST(Decode, SingleIterationAndEarlyStop) {
  OptimConfig c;
  c.max_iter = 1;
  const DecodeResult r = relaxed_decode(single({4, 5}), c);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.trace.size(), 2u);
  c.max_iter = 500;
  c.eta = 1e-9;
  c.tolerance = 1e-6;
  const DecodeResult s = relaxed_decode(single({4, 5}), c);
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.iterations, 3u);
}

TEST(Decode, ConfigValidation) {
  OptimConfig c;
  c.eta = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_iter = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.anneal = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(parse_init("random"), std::invalid_argument);
  EXPECT_EQ(parse_algorithm("sgd"), Algorithm::kSGD);
}

TEST(Convergence, IterationsToWithin) {
  DecodeTrace t;
  for (double c : {10.0, 5.0, 4.02, 4.0, 4.001}) t.push_back({t.size(), c, 0, 0, 0});
  EXPECT_EQ(iterations_to_within(t, 0.01), 2u);
  EXPECT_EQ(iterations_to_within(t, 0.0), 3u);
  EXPECT_EQ(iterations_to_within(t, 10.0), 0u);
}

TEST(LineSearch, GridAndBestEta) {
  const auto g = log_grid(1.0, 100.0, 3);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g[1], 10.0, 1e-12);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 100.0);
  EXPECT_EQ(log_grid(5.0, 9.0, 1), std::vector<double>{5.0});
  const std::vector<LineSearchPoint> pts{{1, 3.0}, {10, 2.0}, {100, 2.5}};
  EXPECT_EQ(best_eta(pts), 10.0);
}

TEST(LineSearch, MeanCostIsAveragedOverSentences) {
  const std::vector<ObjectiveSpec> specs{single({4}), single({5, 6})};
  OptimConfig c;
  c.max_iter = 5;
  const std::vector<double> etas{1.0, 10.0};
  const auto pts = line_search(specs, c, etas, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    OptimConfig ci = c;
    ci.eta = etas[i];
    double mean = 0.0;
    for (const auto& s : specs) {
      const DecodeResult r = relaxed_decode(s, ci);
      mean += r.cost / static_cast<double>(r.length) / 2.0;
    }
    EXPECT_NEAR(pts[i].mean_cost, mean, 1e-12);
  }
}

TEST(Trace, CsvLayout) {
  std::ostringstream os;
  write_trace_header(os);
  write_trace(os, 3, {{0, 1.5, 2.0, 0.25, 0.5}});
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "sentence,t,cost,discrete_cost,grad_norm,entropy");
  EXPECT_EQ(s.substr(s.find('\n') + 1, 2), "3,");
}
