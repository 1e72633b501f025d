#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "reldec/model.hpp"
#include "test_support.hpp"

using namespace reldec;
using namespace reldec::testing;

TEST(Model, ParameterShapesFollowConfig) {
  const ModelParams p = tiny_model(9, 11, 1);
  EXPECT_EQ(p.src_embed.shape_string(), "[9x8]");
  EXPECT_EQ(p.tgt_embed.shape_string(), "[11x8]");
  EXPECT_EQ(p.out_w.shape_string(), "[11x16]");
  EXPECT_EQ(p.dec1_w.shape_string(), "[64x56]");
  EXPECT_NO_THROW(p.validate());
}

TEST(Model, RandomInitIsSeeded) {
  const ModelParams a = tiny_model(9, 11, 3), b = tiny_model(9, 11, 3), c = tiny_model(9, 11, 4);
  EXPECT_EQ(a.out_w, b.out_w);
  EXPECT_NE(a.out_w, c.out_w);
}

TEST(Model, ConfigValidation) {
  ModelConfig c;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.src_vocab = 6;
  c.tgt_vocab = 6;
  EXPECT_NO_THROW(c.validate());
  c.hidden = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Model, SequenceLogProbIsNegativeAndFinite) {
  const ModelParams p = tiny_model(9, 11, 1);
  const double lp = sequence_log_prob(p, std::vector<int>{4, 5, 6}, std::vector<int>{7, 8, kEos});
  EXPECT_LT(lp, 0.0);
  EXPECT_TRUE(std::isfinite(lp));
}

TEST(Model, TokenProbabilitiesSumToOne) {
  const ModelParams p = tiny_model(7, 6, 5);
  const std::vector<int> x{4, 5};
  double total = 0.0;
  for (int t = 0; t < 6; ++t) total += std::exp(sequence_log_prob(p, x, std::vector<int>{t}));
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Model, ZeroOutputLayerGivesUniformPredictions) {
  ModelParams p = tiny_model(9, 11, 2);
  p.out_w = Tensor::zeros_like(p.out_w);
  p.out_b = Tensor::zeros_like(p.out_b);
  const std::vector<int> y{4, 9, 5, kEos};
  EXPECT_NEAR(-sequence_log_prob(p, std::vector<int>{4, 5}, y), 4 * std::log(11.0), 1e-12);
}

TEST(Model, OneHotRelaxedEqualsDiscrete) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p = tiny_model(9, 10, 100 + trial);
    const TokenIds x = random_tokens(1 + trial % 5, 9, rng);
    TokenIds y = random_tokens(1 + trial % 4, 10, rng);
    y.push_back(kEos);
    const double a = sequence_log_prob(p, x, y);
    const double b = relaxed_log_prob(p, x, one_hot_rows(y, 10));
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST(Model, RelaxedEncoderMatchesDiscreteOnOneHotSource) {
  const ModelParams p = tiny_model(9, 10, 4);
  const TokenIds x{4, 7, 5};
  const TokenIds y{6, 8, kEos};
  ad::Tape tape;
  const ModelGraph g = ModelGraph::bind(tape, p, false);
  const double discrete = target_log_prob(g, encode(g, x), y).value()[0];
  const ad::Var rows = tape.constant(one_hot_rows(x, 9));
  const double relaxed = target_log_prob(g, encode_relaxed(g, rows), y).value()[0];
  EXPECT_NEAR(discrete, relaxed, 1e-12);
}

TEST(Model, ParameterGradientsMatchFiniteDifferences) {
  const ModelParams base = tiny_model(7, 8, 21);
  const TokenIds x{4, 6, 5}, y{5, 7, kEos};
  ad::Tape tape;
  const ModelGraph g = ModelGraph::bind(tape, base, true);
  const ad::Var lp = target_log_prob(g, encode(g, x), y);
  const auto leaves = g.leaves();
  const auto grads = tape.gradients(lp, leaves);

  std::size_t index = 0;
  double worst = 0.0;
  base.for_each([&](const char* name, const Tensor& t) {
    const std::size_t which = index++;
    // A handful of entries per tensor keeps the test fast.
    for (std::size_t k = 0; k < t.size(); k += std::max<std::size_t>(1, t.size() / 5)) {
      auto f = [&](double delta) {
        ModelParams q = base;
        std::size_t j = 0;
        q.for_each([&](const char*, Tensor& u) {
          if (j++ == which) u.data()[k] += delta;
        });
        return sequence_log_prob(q, x, y);
      };
      const double eps = 1e-5;
      const double numeric = (f(eps) - f(-eps)) / (2 * eps);
      const double err = relative_error(grads[which][k], numeric, 1e-4);
      EXPECT_LT(err, 1e-5) << name << "[" << k << "] " << grads[which][k] << " vs " << numeric;
      worst = std::max(worst, err);
    }
  });
  EXPECT_LT(worst, 1e-5);
}

TEST(Model, RelaxedRowGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  const ModelParams p = tiny_model(7, 8, 31);
  const TokenIds x{4, 5};
  const Tensor rows = random_simplex(3, 8, rng);
  ad::Tape tape;
  const ModelGraph g = ModelGraph::bind(tape, p, false);
  const ad::Var r = tape.variable(rows);
  const ad::Var lp = relaxed_target_log_prob(g, encode(g, x), r);
  tape.backward(lp);
  // The unconstrained extension is differentiable, so raw FD applies.
  auto f = [&](const Tensor& z) {
    ad::Tape t2;
    const ModelGraph g2 = ModelGraph::bind(t2, p, false);
    return relaxed_target_log_prob(g2, encode(g2, x), t2.constant(z)).value()[0];
  };
  EXPECT_LT(max_relative_error(tape.grad(r), numeric_gradient(f, rows, 1e-5)), 1e-5);
}

TEST(Model, EncodeRejectsBadInput) {
  const ModelParams p = tiny_model(7, 8, 1);
  ad::Tape tape;
  const ModelGraph g = ModelGraph::bind(tape, p, false);
  EXPECT_THROW(encode(g, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(encode(g, std::vector<int>{4, 7}), std::out_of_range);
  EXPECT_THROW(relaxed_log_prob(p, std::vector<int>{4}, Tensor({2, 8})), std::invalid_argument);
}

TEST(Model, SimplexCheck) {
  EXPECT_NO_THROW(check_simplex_rows(Tensor::matrix(2, 2, {0.25, 0.75, 1.0, 0.0})));
  EXPECT_THROW(check_simplex_rows(Tensor::matrix(1, 2, {0.5, 0.6})), std::invalid_argument);
  EXPECT_THROW(check_simplex_rows(Tensor::matrix(1, 2, {1.1, -0.1})), std::invalid_argument);
}

TEST(Model, ReverseKeepLast) {
  EXPECT_EQ(reverse_keep_last(std::vector<int>{4, 5, 6, kEos}), (TokenIds{6, 5, 4, kEos}));
  EXPECT_EQ(reverse_keep_last(std::vector<int>{kEos}), (TokenIds{kEos}));
  const TokenIds y{4, 9, 7, 5, kEos};
  EXPECT_EQ(reverse_keep_last(reverse_keep_last(y)), y);
  EXPECT_EQ(reverse_keep_last_order(4), (std::vector<std::size_t>{2, 1, 0, 3}));
}

TEST(Model, CheckpointRoundTripIsBitExact) {
  const ModelParams p = tiny_model(9, 11, 8, 0.5, Direction::kRightToLeft, Side::kTargetToSource);
  std::stringstream ss;
  write_checkpoint(p, ss);
  const ModelParams q = read_checkpoint(ss);
  EXPECT_EQ(q.config, p.config);
  std::vector<const Tensor*> a, b;
  p.for_each([&](const char*, const Tensor& t) { a.push_back(&t); });
  q.for_each([&](const char*, const Tensor& t) { b.push_back(&t); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);

  const auto path = std::filesystem::temp_directory_path() / "reldec_model_ckpt.bin";
  save_checkpoint(p, path);
  EXPECT_EQ(load_checkpoint(path).out_w, p.out_w);
}

TEST(Model, CorruptCheckpointIsRejected) {
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(read_checkpoint(bad), std::runtime_error);
  std::stringstream ss;
  write_checkpoint(tiny_model(7, 7, 1), ss);
  std::string s = ss.str();
  s.resize(s.size() / 2);
  std::stringstream cut(s);
  EXPECT_THROW(read_checkpoint(cut), std::runtime_error);
}
