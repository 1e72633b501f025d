#include "reldec/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace reldec {

namespace {

const std::vector<std::string> kReservedTokens = {"<pad>", "<unk>", "<s>", "</s>"};

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

// ---- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const auto& t : kReservedTokens) {
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::build(const std::vector<Sentence>& sentences, std::size_t min_freq) {
  Vocabulary v;
  for (const auto& s : sentences)
    for (const auto& tok : s) ++v.freq_[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, f] : v.freq_) {
    if (f >= min_freq && !v.ids_.count(tok)) kept.emplace_back(tok, f);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, f] : kept) {
    v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumReserved ||
      !std::equal(kReservedTokens.begin(), kReservedTokens.end(), tokens.begin())) {
    throw std::invalid_argument("vocabulary must start with the four reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (!v.ids_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    }
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::size_t Vocabulary::frequency(const std::string& token) const {
  auto it = freq_.find(token);
  return it == freq_.end() ? 0 : it->second;
}

TokenIds Vocabulary::encode(const Sentence& s) const {
  TokenIds out;
  out.reserve(s.size());
  for (const auto& tok : s) out.push_back(id(tok));
  return out;
}

Sentence Vocabulary::decode(const TokenIds& ids) const {
  Sentence out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    out.push_back(token(id));
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

std::vector<Sentence> source_side(const ParallelCorpus& c) {
  std::vector<Sentence> out;
  for (const auto& p : c.pairs) out.push_back(p.source);
  return out;
}

std::vector<Sentence> target_side(const ParallelCorpus& c) {
  std::vector<Sentence> out;
  for (const auto& p : c.pairs) out.push_back(p.target);
  return out;
}

// ---- corpus IO --------------------------------------------------------------

Sentence tokenize(const std::string& line) {
  std::istringstream is(line);
  Sentence out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string join(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

namespace {

std::vector<Sentence> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open corpus file " + path.string());
  std::vector<Sentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    Sentence s = tokenize(line);
    if (s.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": empty sentence");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

ParallelCorpus read_corpus(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path) {
  auto src = read_lines(src_path);
  auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw std::runtime_error("line count mismatch: " + src_path.string() + " has " + std::to_string(src.size()) +
                             " lines, " + tgt_path.string() + " has " + std::to_string(tgt.size()));
  }
  ParallelCorpus c;
  for (std::size_t i = 0; i < src.size(); ++i) c.pairs.push_back({std::move(src[i]), std::move(tgt[i])});
  return c;
}

void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                  const std::filesystem::path& tgt_path) {
  std::ofstream src(src_path, std::ios::binary), tgt(tgt_path, std::ios::binary);
  if (!src) throw std::runtime_error("cannot write " + src_path.string());
  if (!tgt) throw std::runtime_error("cannot write " + tgt_path.string());
  for (const auto& p : corpus.pairs) {
    if (p.source.empty() || p.target.empty()) throw std::invalid_argument("corpus contains an empty sentence");
    src << join(p.source) << '\n';
    tgt << join(p.target) << '\n';
  }
  if (!src || !tgt) throw std::runtime_error("write failed for " + src_path.string());
}

// ---- synthetic tasks --------------------------------------------------------

TaskKind parse_task(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "cipher") return TaskKind::kCipher;
  if (name == "noisy-cipher") return TaskKind::kNoisyCipher;
  throw std::invalid_argument("unknown task '" + name + "' (expected copy, reverse, cipher or noisy-cipher)");
}

std::string task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kReverse: return "reverse";
    case TaskKind::kCipher: return "cipher";
    case TaskKind::kNoisyCipher: return "noisy-cipher";
  }
  return "copy";
}

std::string synthetic_word(std::size_t k) {
  std::string out;
  ++k;
  while (k > 0) {
    --k;
    out.insert(out.begin(), static_cast<char>('a' + k % 26));
    k /= 26;
  }
  return out;
}

ParallelCorpus generate_synthetic(const TaskSpec& spec) {
  if (spec.vocab_size < 8) throw std::invalid_argument("synthetic vocabulary must have at least 8 words");
  if (spec.pairs == 0) throw std::invalid_argument("number of pairs must be positive");
  if (spec.min_length < 1 || spec.min_length > spec.max_length) {
    throw std::invalid_argument("invalid sentence length range");
  }
  std::mt19937_64 rng(spec.seed);
  const std::size_t V = spec.vocab_size;

  std::vector<std::size_t> perm(V);
  std::iota(perm.begin(), perm.end(), 0);
  if (!spec.identity_permutation) std::shuffle(perm.begin(), perm.end(), rng);

  // Each word gets two confusable words; noise draws one of them (70/30).
  std::vector<std::array<std::size_t, 2>> confusion(V);
  std::uniform_int_distribution<std::size_t> other(1, V - 1);
  for (std::size_t w = 0; w < V; ++w) {
    const std::size_t a = (w + other(rng)) % V;
    std::size_t b = a;
    while (b == a) b = (w + other(rng)) % V;
    confusion[w] = {a, b};
  }

  std::uniform_int_distribution<std::size_t> len_dist(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> word_dist(0, V - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ParallelCorpus out;
  out.pairs.reserve(spec.pairs);
  for (std::size_t n = 0; n < spec.pairs; ++n) {
    const std::size_t len = len_dist(rng);
    std::vector<std::size_t> src(len);
    for (auto& w : src) w = word_dist(rng);

    std::vector<std::size_t> tgt;
    switch (spec.kind) {
      case TaskKind::kCopy: tgt = src; break;
      case TaskKind::kReverse: tgt.assign(src.rbegin(), src.rend()); break;
      case TaskKind::kCipher:
      case TaskKind::kNoisyCipher: {
        tgt.resize(len);
        for (std::size_t i = 0; i < len; ++i) tgt[i] = perm[src[i]];
        for (std::size_t s = 0; s < spec.swaps_per_sentence && len >= 2; ++s) {
          std::uniform_int_distribution<std::size_t> pos(0, len - 2);
          const std::size_t k = pos(rng);
          std::swap(tgt[k], tgt[k + 1]);
        }
        if (spec.kind == TaskKind::kNoisyCipher) {
          for (auto& w : tgt) {
            if (unit(rng) < spec.noise_rate) w = confusion[w][unit(rng) < 0.7 ? 0 : 1];
          }
        }
        break;
      }
    }
    SentencePair p;
    for (auto w : src) p.source.push_back(synthetic_word(w));
    for (auto w : tgt) p.target.push_back(synthetic_word(w));
    out.pairs.push_back(std::move(p));
  }
  return out;
}

CorpusSplits split_corpus(const ParallelCorpus& all, std::uint64_t seed) {
  if (all.empty()) throw std::invalid_argument("cannot split an empty corpus");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = all.size();
  const std::size_t n_dev = n / 20;
  const std::size_t n_test = n / 20;
  const std::size_t n_train = n - n_dev - n_test;

  CorpusSplits s;
  s.train.split = Split::kTrain;
  s.dev.split = Split::kDev;
  s.test.split = Split::kTest;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = all.pairs[order[i]];
    if (i < n_train) s.train.pairs.push_back(p);
    else if (i < n_train + n_dev) s.dev.pairs.push_back(p);
    else s.test.pairs.push_back(p);
  }
  return s;
}

}  // namespace reldec
