#include "reldec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace reldec {

std::vector<EncodedPair> encode_corpus(const ParallelCorpus& corpus, const Vocabulary& src, const Vocabulary& tgt) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back({src.encode(p.source), tgt.encode(p.target)});
  return out;
}

std::vector<EncodedPair> orient_pairs(const std::vector<EncodedPair>& pairs, Direction direction, Side side) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    EncodedPair o = side == Side::kSourceToTarget ? p : EncodedPair{p.target, p.source};
    if (o.source.empty() || o.target.empty()) throw std::invalid_argument("training pair with an empty side");
    if (direction == Direction::kRightToLeft) std::reverse(o.target.begin(), o.target.end());
    o.target.push_back(kEos);
    out.push_back(std::move(o));
  }
  return out;
}

double perplexity(const ModelParams& params, const std::vector<EncodedPair>& oriented) {
  if (oriented.empty()) throw std::invalid_argument("perplexity of an empty corpus");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& p : oriented) {
    nll -= sequence_log_prob(params, p.source, p.target);
    tokens += p.target.size();
  }
  return std::exp(nll / static_cast<double>(tokens));
}

TrainResult train_model(const ModelConfig& config, const std::vector<EncodedPair>& train,
                        const std::vector<EncodedPair>& dev, const TrainConfig& options) {
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.empty()) throw std::invalid_argument("development corpus is empty");
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  config.validate();

  const auto train_set = orient_pairs(train, config.direction, config.side);
  const auto dev_set = orient_pairs(dev, config.direction, config.side);

  TrainResult result;
  ModelParams params = ModelParams::random(config, options.seed, options.init_scale);
  result.initial_dev_perplexity = perplexity(params, dev_set);
  result.best_dev_perplexity = result.initial_dev_perplexity;
  result.params = params;

  std::vector<Tensor> accum;
  params.for_each([&](const char*, const Tensor& t) { accum.push_back(Tensor::zeros_like(t)); });

  std::mt19937_64 rng(options.seed + 1);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = options.learning_rate;
  std::size_t bad_epochs = 0;
  double best_trained = std::numeric_limits<double>::infinity();

  auto apply_update = [&](std::size_t batch_count) {
    double norm2 = 0.0;
    const double inv = 1.0 / static_cast<double>(batch_count);
    for (auto& g : accum)
      for (double& v : g.data()) {
        v *= inv;
        norm2 += v * v;
      }
    const double norm = std::sqrt(norm2);
    const double clip = norm > options.clip_norm ? options.clip_norm / norm : 1.0;
    std::size_t k = 0;
    params.for_each([&](const char*, Tensor& t) {
      auto g = accum[k++].data();
      auto w = t.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= lr * clip * g[i];
        g[i] = 0.0;
      }
    });
  };

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    std::size_t in_batch = 0;

    for (std::size_t idx : order) {
      const auto& p = train_set[idx];
      ad::Tape tape;
      ModelGraph g = ModelGraph::bind(tape, params, true);
      EncoderStates enc = encode(g, p.source);
      ad::Var loss = ad::scale(target_log_prob(g, enc, p.target), -1.0);
      epoch_nll += loss.value()[0];
      epoch_tokens += p.target.size();
      tape.backward(loss);
      const auto leaves = g.leaves();
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        if (const double* gr = tape.grad_data(leaves[k].id())) {
          auto dst = accum[k].data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gr[i];
        }
      }
      if (++in_batch == options.batch_size) {
        apply_update(in_batch);
        in_batch = 0;
      }
    }
    if (in_batch > 0) apply_update(in_batch);

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_nll / static_cast<double>(epoch_tokens);
    log.dev_perplexity = perplexity(params, dev_set);
    log.learning_rate = lr;
    result.epochs.push_back(log);
    if (options.on_epoch) options.on_epoch(epoch, log.train_loss, log.dev_perplexity);

    if (log.dev_perplexity < result.best_dev_perplexity) {
      result.best_dev_perplexity = log.dev_perplexity;
      result.best_epoch = epoch;
      result.params = params;
    }
    // Halving and early stopping compare trained epochs only.
    if (log.dev_perplexity < best_trained) {
      best_trained = log.dev_perplexity;
      bad_epochs = 0;
    } else {
      lr *= 0.5;
      if (++bad_epochs >= options.patience) break;
    }
  }
  return result;
}

}  // namespace reldec
