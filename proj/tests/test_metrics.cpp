#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "reldec/metrics.hpp"
#include "reldec/svg.hpp"
#include "test_support.hpp"

using namespace reldec;
using namespace reldec::testing;

namespace {

std::vector<Sentence> corpus(std::initializer_list<const char*> lines) {
  std::vector<Sentence> out;
  for (const char* l : lines) out.push_back(tokenize(l));
  return out;
}

}  // namespace

TEST(Bleu, HandComputedPrecisions) {
  const BleuStats s = bleu_stats(corpus({"the the the cat"}), corpus({"the cat sat"}));
  EXPECT_DOUBLE_EQ(s.precisions[0], 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.precisions[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.precisions[2], 0.0);
  EXPECT_DOUBLE_EQ(s.brevity_penalty, 1.0);
  EXPECT_EQ(s.score, 0.0);
  EXPECT_EQ(s.hyp_length, 4u);
  EXPECT_EQ(s.ref_length, 3u);
}

TEST(Bleu, HandComputedScore) {
  const double b = bleu(corpus({"the cat sat on the mat"}), corpus({"the cat sat on a mat"}));
  EXPECT_NEAR(b, 100.0 * std::pow(5.0 / 6.0 * 3.0 / 5.0 * 2.0 / 4.0 * 1.0 / 3.0, 0.25), 1e-10);
}

TEST(Bleu, BrevityPenalty) {
  const BleuStats s = bleu_stats(corpus({"the cat sat on"}), corpus({"the cat sat on the mat"}));
  EXPECT_NEAR(s.brevity_penalty, std::exp(1.0 - 6.0 / 4.0), 1e-12);
  EXPECT_NEAR(s.score, 100.0 * std::exp(-0.5), 1e-10);
}

TEST(Bleu, StatisticsArePooledOverTheCorpus) {
  // The second sentence has no 4-gram at all; pooled counts still give a score.
  const auto refs = corpus({"a b c d e", "x y"});
  EXPECT_EQ(bleu(refs, refs), 100.0);
}

TEST(Bleu, IsCaseInsensitive) {
  EXPECT_EQ(bleu(corpus({"The Cat sat on It"}), corpus({"the cat SAT on it"})), 100.0);
}

TEST(Bleu, DisjointCorporaScoreZero) {
  EXPECT_EQ(bleu(corpus({"a b c d", "e f g h"}), corpus({"p q r s", "t u v w"})), 0.0);
}

TEST(Bleu, CountMismatchIsAnError) {
  EXPECT_THROW(bleu(corpus({"a b"}), corpus({"a b", "c d"})), std::invalid_argument);
  EXPECT_THROW(bleu({}, {}), std::invalid_argument);
}

TEST(Bleu, CorruptingATokenNeverHelps) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> word(0, 5), len(4, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> refs, hyps;
    for (int i = 0; i < 5; ++i) {
      Sentence r, h;
      const int n = len(rng);
      for (int k = 0; k < n; ++k) r.push_back(synthetic_word(static_cast<std::size_t>(word(rng))));
      h = r;
      h[static_cast<std::size_t>(word(rng)) % h.size()] = synthetic_word(static_cast<std::size_t>(word(rng)));
      refs.push_back(r);
      hyps.push_back(h);
    }
    const double before = bleu(hyps, refs);
    auto worse = hyps;
    worse[0][0] = "zzz";
    EXPECT_LE(bleu(worse, refs), before + 1e-12);
  }
}

TEST(Costs, NormalizedByLength) {
  const ModelParams m = tiny_model(9, 8, 3);
  const ObjectiveSpec s{ObjectiveKind::kSingle, 0.5, &m, nullptr, {4, 5}};
  const TokenIds y{4, 6, kEos};
  EXPECT_DOUBLE_EQ(normalized_discrete_cost(s, y), discrete_cost(s, y) / 3.0);
  EXPECT_DOUBLE_EQ(normalized_continuous_cost(s, one_hot_rows(y, 8)), relaxed_cost(s, one_hot_rows(y, 8)) / 3.0);
  EXPECT_THROW(normalized_discrete_cost(s, TokenIds{}), std::invalid_argument);
}

TEST(Costs, DiagonalFraction) {
  const std::vector<CostPoint> pts{{1.0, 1.0}, {1.0, 1.005}, {1.0, 1.02}, {2.0, 0.5}};
  EXPECT_DOUBLE_EQ(diagonal_fraction(pts), 0.5);
  EXPECT_DOUBLE_EQ(diagonal_fraction(pts, 0.1), 0.75);
  EXPECT_EQ(diagonal_fraction({}), 0.0);
  std::ostringstream os;
  write_cost_scatter(os, pts);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "sentence,continuous,discrete");
}

TEST(Report, RowFormatting) {
  const EvalReport r = make_report("eg", corpus({"a b c d", "e f g h i"}), corpus({"a b c d", "e f g h i"}), {0.5, 1.0},
                                   {1.0, 2.0});
  EXPECT_DOUBLE_EQ(r.average_length, 4.5);
  std::ostringstream os;
  write_report_header(os);
  write_report_row(os, r);
  EXPECT_EQ(os.str(), "name,bleu,avg_len,mean_continuous_cost,mean_discrete_cost\neg,100.0000,4.5000,0.7500,1.5000\n");
  EXPECT_THROW(make_report("x", corpus({"a"}), corpus({"a"}), {NAN}, {1.0}), std::domain_error);
}

TEST(Svg, RendersSeriesAndEscapesText) {
  Plot p;
  p.title = "cost <a&b>";
  p.x_label = "t";
  p.y_label = "Q";
  p.series.push_back({"eg", {0, 1, 2}, {3, 2, 1}, true});
  const std::string svg = render_svg(p);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("&lt;a&amp;b&gt;"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
