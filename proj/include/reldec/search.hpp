#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reldec/data.hpp"
#include "reldec/model.hpp"

namespace reldec {

struct Hypothesis {
  TokenIds tokens;        // model order; ends in eos when complete
  double log_prob = 0.0;  // sum of per-step log-probabilities
  bool complete = false;
};

// Completed (or max-length) hypotheses, best first, no duplicates.
using NBestList = std::vector<Hypothesis>;

// 2|x| + 5.
std::size_t default_max_length(std::size_t source_length);

// Argmax at every step, ties to the lowest token id; stops at eos or max_len.
Hypothesis greedy_decode(const ModelParams& model, std::span<const int> source, std::size_t max_len);

struct BeamOptions {
  std::size_t width = 5;
  std::size_t max_len = 0;  // 0 -> default_max_length(|x|)
  std::size_t n_best = 1;
};

// Length-synchronous beam over summed log-probabilities, no length
// normalization. Finished hypotheses leave the beam and shrink it; at max_len
// the surviving prefixes are returned as incomplete hypotheses. Ties are
// broken by parent rank, then token id.
NBestList beam_decode(const ModelParams& model, std::span<const int> source, const BeamOptions& options);

// log P(y | x) under `model`, interpreting its tags: a right-to-left model
// scores the reversed y, a target-to-source model scores x given y. `x` has
// no eos; `y` is a target sequence ending in its eos slot.
double force_score(const ModelParams& model, std::span<const int> x, std::span<const int> y);

// Tokens a model emits for target y (r2l: reversed with eos kept last).
TokenIds to_model_order(const ModelParams& model, std::span<const int> y);
// Inverse of to_model_order for s2t models.
TokenIds to_surface_order(const ModelParams& model, std::span<const int> tokens);

struct Scorer {
  const ModelParams* model = nullptr;
  double weight = 1.0;
};

struct RerankResult {
  Hypothesis best;
  std::size_t original_rank = 0;
  std::vector<double> combined_scores;  // one per n-best entry
};

// argmax_h sum_k weight_k * force_score_k(x, h); ties go to the lower
// original rank. Weights must sum to 1. Hypothesis tokens are in surface
// (left-to-right) order.
RerankResult rerank(const NBestList& nbest, std::span<const int> x, std::span<const Scorer> scorers);

// "sentence-id ||| tokens ||| score" per hypothesis.
void write_nbest(std::ostream& os, std::size_t sentence_id, const NBestList& nbest, const Vocabulary& vocab);

struct NBestEntry {
  std::size_t sentence_id = 0;
  Sentence tokens;
  double score = 0.0;
};
std::vector<NBestEntry> read_nbest(std::istream& is);

}  // namespace reldec
