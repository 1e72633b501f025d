#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace reldec {

// Reserved ids, identical in every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumReserved = 4;

using TokenIds = std::vector<int>;
using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence source;
  Sentence target;
  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

enum class Split { kTrain, kDev, kTest };
std::string split_name(Split s);

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  Split split = Split::kTrain;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  friend bool operator==(const ParallelCorpus&, const ParallelCorpus&) = default;
};

class Vocabulary {
 public:
  // Only the reserved tokens.
  Vocabulary();

  // Tokens with frequency >= min_freq get ids from 4 upwards ordered by
  // (frequency desc, token asc); everything else maps to unk.
  static Vocabulary build(const std::vector<Sentence>& sentences, std::size_t min_freq);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  std::size_t frequency(const std::string& token) const;

  TokenIds encode(const Sentence& s) const;
  // Stops at the first eos and drops bos/pad.
  Sentence decode(const TokenIds& ids) const;

  // One token per line, in id order (reserved entries included).
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::map<std::string, std::size_t> freq_;
};

std::vector<Sentence> source_side(const ParallelCorpus& c);
std::vector<Sentence> target_side(const ParallelCorpus& c);

// Whitespace tokenization; a trailing '\r' is dropped so CRLF files read the
// same as LF files.
Sentence tokenize(const std::string& line);
std::string join(const Sentence& s);

ParallelCorpus read_corpus(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path);
void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& src_path,
                  const std::filesystem::path& tgt_path);

// ---- synthetic tasks ------------------------------------------------------

enum class TaskKind { kCopy, kReverse, kCipher, kNoisyCipher };
TaskKind parse_task(const std::string& name);
std::string task_name(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::kCopy;
  std::size_t pairs = 2000;
  std::size_t vocab_size = 20;  // content word types
  std::uint64_t seed = 1;
  std::size_t min_length = 3;
  std::size_t max_length = 10;
  // cipher options
  bool identity_permutation = false;
  std::size_t swaps_per_sentence = 1;
  double noise_rate = 0.1;  // noisy-cipher only
};

// Word for content index k: a, b, ..., z, aa, ab, ...
std::string synthetic_word(std::size_t k);

// All pairs, unsplit.
ParallelCorpus generate_synthetic(const TaskSpec& spec);

struct CorpusSplits {
  ParallelCorpus train, dev, test;
};

// 90/5/5 by a seeded shuffle.
CorpusSplits split_corpus(const ParallelCorpus& all, std::uint64_t seed);

}  // namespace reldec
