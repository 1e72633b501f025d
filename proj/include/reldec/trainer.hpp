#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "reldec/data.hpp"
#include "reldec/model.hpp"

namespace reldec {

// Token ids of one sentence pair, source-to-target, without eos.
struct EncodedPair {
  TokenIds source;
  TokenIds target;
};

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus, const Vocabulary& src, const Vocabulary& tgt);

// Rewrites s->t pairs into what a model of the given kind reads and emits:
// sides swapped for t2s, target reversed for r2l, eos appended to the target.
std::vector<EncodedPair> orient_pairs(const std::vector<EncodedPair>& pairs, Direction direction, Side side);

struct TrainConfig {
  std::size_t max_epochs = 30;
  double learning_rate = 0.3;
  std::size_t batch_size = 1;
  double clip_norm = 5.0;
  std::size_t patience = 3;  // non-improving dev epochs before stopping
  std::uint64_t seed = 1;
  double init_scale = 0.08;
  // Called after every epoch; handy for progress output.
  std::function<void(std::size_t epoch, double train_loss, double dev_ppl)> on_epoch;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean NLL per target token
  double dev_perplexity = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;  // best dev-perplexity parameters
  double initial_dev_perplexity = 0.0;
  double best_dev_perplexity = 0.0;
  std::size_t best_epoch = 0;  // 0 means the initial parameters
  std::vector<EpochLog> epochs;
};

// Per-token perplexity of already-oriented pairs.
double perplexity(const ModelParams& params, const std::vector<EncodedPair>& oriented);

// Maximum-likelihood SGD with global-norm clipping, learning-rate halving on
// dev plateau and early stopping. `train` and `dev` are s->t pairs; they are
// oriented according to config.direction / config.side.
TrainResult train_model(const ModelConfig& config, const std::vector<EncodedPair>& train,
                        const std::vector<EncodedPair>& dev, const TrainConfig& options);

}  // namespace reldec
