#include "reldec/search.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace reldec {

using ad::Var;

std::size_t default_max_length(std::size_t source_length) { return 2 * source_length + 5; }

namespace {

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

Hypothesis greedy_decode(const ModelParams& model, std::span<const int> source, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be at least 1");
  ad::Tape tape;
  ModelGraph g = ModelGraph::bind(tape, model, false);
  EncoderStates enc = encode(g, source);
  DecoderState state = initial_state(g, enc);
  Var prev = target_embedding(g, kBos);

  Hypothesis h;
  for (std::size_t i = 0; i < max_len; ++i) {
    DecoderStep step = decoder_step(g, prev, state, enc);
    Var lp = ad::log_softmax(step.logits);
    const auto values = lp.value().data();
    const std::size_t tok = argmax_lowest(values);
    h.log_prob += values[tok];
    h.tokens.push_back(static_cast<int>(tok));
    if (static_cast<int>(tok) == kEos) {
      h.complete = true;
      break;
    }
    state = step.state;
    prev = target_embedding(g, static_cast<int>(tok));
  }
  return h;
}

NBestList beam_decode(const ModelParams& model, std::span<const int> source, const BeamOptions& options) {
  if (options.width == 0) throw std::invalid_argument("beam width must be at least 1");
  if (options.n_best == 0 || options.n_best > options.width) {
    throw std::invalid_argument("n_best must be in [1, width]");
  }
  const std::size_t max_len = options.max_len ? options.max_len : default_max_length(source.size());

  ad::Tape tape;
  ModelGraph g = ModelGraph::bind(tape, model, false);
  EncoderStates enc = encode(g, source);

  struct Active {
    TokenIds tokens;
    double log_prob = 0.0;
    DecoderState state;
    Var prev;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    std::size_t token;
  };

  std::vector<Active> beam;
  beam.push_back({{}, 0.0, initial_state(g, enc), target_embedding(g, kBos)});
  NBestList finished;

  for (std::size_t len = 0; len < max_len && !beam.empty(); ++len) {
    std::vector<Candidate> cands;
    std::vector<DecoderState> next_states;
    next_states.reserve(beam.size());
    for (std::size_t p = 0; p < beam.size(); ++p) {
      DecoderStep step = decoder_step(g, beam[p].prev, beam[p].state, enc);
      const Var lp = ad::log_softmax(step.logits);
      const auto values = lp.value().data();
      for (std::size_t w = 0; w < values.size(); ++w) cands.push_back({beam[p].log_prob + values[w], p, w});
      next_states.push_back(step.state);
    }
    const std::size_t capacity = options.width - finished.size();
    const std::size_t keep = std::min(capacity, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });

    std::vector<Active> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = cands[k];
      TokenIds tokens = beam[c.parent].tokens;
      tokens.push_back(static_cast<int>(c.token));
      if (static_cast<int>(c.token) == kEos) {
        finished.push_back({std::move(tokens), c.score, true});
      } else {
        next.push_back({std::move(tokens), c.score, next_states[c.parent], target_embedding(g, static_cast<int>(c.token))});
      }
    }
    beam = std::move(next);
  }
  for (auto& a : beam) finished.push_back({std::move(a.tokens), a.log_prob, false});

  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
  if (finished.size() > options.n_best) finished.resize(options.n_best);
  return finished;
}

TokenIds to_model_order(const ModelParams& model, std::span<const int> y) {
  if (model.config.direction == Direction::kRightToLeft) return reverse_keep_last(y);
  return TokenIds(y.begin(), y.end());
}

TokenIds to_surface_order(const ModelParams& model, std::span<const int> tokens) {
  return to_model_order(model, tokens);
}

double force_score(const ModelParams& model, std::span<const int> x, std::span<const int> y) {
  if (y.empty()) throw std::invalid_argument("force_score: empty target");
  if (model.config.side == Side::kSourceToTarget) {
    const TokenIds target = to_model_order(model, y);
    return sequence_log_prob(model, x, target);
  }
  // Target-to-source: y (without its eos slot) is the input, x is emitted.
  const std::span<const int> input = y.size() > 1 ? y.first(y.size() - 1) : y;
  TokenIds target(x.begin(), x.end());
  target.push_back(kEos);
  target = to_model_order(model, target);
  return sequence_log_prob(model, input, target);
}

RerankResult rerank(const NBestList& nbest, std::span<const int> x, std::span<const Scorer> scorers) {
  if (nbest.empty()) throw std::invalid_argument("rerank: empty n-best list");
  if (scorers.empty()) throw std::invalid_argument("rerank: no scorers");
  double total = 0.0;
  for (const auto& s : scorers) {
    if (!s.model) throw std::invalid_argument("rerank: scorer without a model");
    total += s.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("rerank: scorer weights must sum to 1");

  RerankResult r;
  for (std::size_t i = 0; i < nbest.size(); ++i) {
    double score = 0.0;
    for (const auto& s : scorers) {
      if (s.weight != 0.0) score += s.weight * force_score(*s.model, x, nbest[i].tokens);
    }
    r.combined_scores.push_back(score);
    if (i == 0 || score > r.combined_scores[r.original_rank]) r.original_rank = i;
  }
  r.best = nbest[r.original_rank];
  return r;
}

void write_nbest(std::ostream& os, std::size_t sentence_id, const NBestList& nbest, const Vocabulary& vocab) {
  for (const auto& h : nbest) {
    os << sentence_id << " ||| " << join(vocab.decode(h.tokens)) << " ||| " << std::setprecision(17) << h.log_prob
       << '\n';
  }
}

std::vector<NBestEntry> read_nbest(std::istream& is) {
  std::vector<NBestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find(" ||| ");
    const auto b = a == std::string::npos ? a : line.find(" ||| ", a + 5);
    if (b == std::string::npos) throw std::runtime_error("n-best line " + std::to_string(lineno) + " is malformed");
    NBestEntry e;
    e.sentence_id = std::stoul(line.substr(0, a));
    e.tokens = tokenize(line.substr(a + 5, b - a - 5));
    e.score = std::stod(line.substr(b + 5));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace reldec
