#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reldec/data.hpp"
#include "reldec/metrics.hpp"
#include "reldec/model.hpp"
#include "reldec/objective.hpp"
#include "reldec/relaxed.hpp"
#include "reldec/search.hpp"
#include "reldec/trainer.hpp"

namespace reldec {

enum class Method { kGreedy, kBeam, kRerank, kEG, kSGD };
std::string method_name(Method m);
Method parse_method(const std::string& s);

// One row of an experiment table, or one `decode` invocation.
struct DecoderSpec {
  std::string name;
  Method method = Method::kGreedy;
  Direction direction = Direction::kLeftToRight;  // which s2t model leads
  ObjectiveKind objective = ObjectiveKind::kSingle;
  double alpha = 0.5;
  std::vector<double> alpha_grid;  // when set, alpha is picked by dev BLEU
  std::size_t width = 5;           // beam width, also the rerank n-best size
  std::size_t nbest = 1;           // n-best entries written for beam
  OptimConfig optim;               // eg / sgd only

  bool relaxed() const { return method == Method::kEG || method == Method::kSGD; }
  void validate() const;
};

struct ModelSet {
  const ModelParams* l2r = nullptr;
  const ModelParams* r2l = nullptr;
  const ModelParams* t2s = nullptr;
};

// Throws if the decoder needs a model the set lacks.
ObjectiveSpec make_objective(const DecoderSpec& spec, const ModelSet& models, std::span<const int> x);

struct SentenceResult {
  TokenIds tokens;            // surface order
  std::size_t length = 0;     // rows of the relaxed iterate, else |tokens|
  double continuous = 0.0;    // normalized; equals `discrete` for discrete decoders
  double discrete = 0.0;      // normalized objective cost of `tokens`
  NBestList nbest;            // beam / rerank
  DecodeTrace trace;          // eg / sgd
  bool fell_back = false;
};

SentenceResult decode_sentence(const DecoderSpec& spec, const ModelSet& models, std::span<const int> x);
// Results are ordered by sentence regardless of `jobs`.
std::vector<SentenceResult> decode_all(const DecoderSpec& spec, const ModelSet& models,
                                       const std::vector<TokenIds>& sources, std::size_t jobs);

// ---- experiment configuration -------------------------------------------------

struct ConvergenceStudy {
  bool enabled = false;
  std::size_t sentences = 20;  // from the dev split
  double eg_eta = 1.0;
  double sgd_eta = 3.0;
  double momentum = 0.9;
  std::size_t max_iter = 100;
};

struct LineSearchStudy {
  bool enabled = false;
  std::size_t sentences = 20;  // from the dev split
  double lo = 10.0, hi = 400.0;
  std::size_t points = 6;
  std::vector<InitKind> inits{InitKind::kUniform, InitKind::kGreedy, InitKind::kBeam};
  double momentum = 0.9;
  std::size_t max_iter = 100;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  TaskSpec task;
  std::size_t min_freq = 1;
  ModelConfig model;  // vocab sizes are filled in from the data
  TrainConfig train;
  std::vector<DecoderSpec> decoders;
  ConvergenceStudy convergence;
  LineSearchStudy line_search;
};

// INI with [experiment], [task], [model], [train], [convergence],
// [line_search] and one [decoder.<name>] section per table row, in order.
ExperimentConfig parse_experiment_config(std::istream& is);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// ---- artifacts ------------------------------------------------------------------

// <dir>/{train,dev,test}.{src,tgt}
void write_splits(const CorpusSplits& splits, const std::filesystem::path& dir);
CorpusSplits read_splits(const std::filesystem::path& dir);

// A trained checkpoint plus vocabularies at <ckpt>.src.vocab / <ckpt>.tgt.vocab
// (in the model's own reading/emitting languages) and a per-epoch log.
struct TrainedModel {
  ModelParams params;
  Vocabulary src_vocab, tgt_vocab;
};
TrainResult train_from_splits(const CorpusSplits& splits, Direction direction, Side side, std::size_t min_freq,
                              const ModelConfig& sizes, const TrainConfig& options, Vocabulary& src_vocab,
                              Vocabulary& tgt_vocab);
void save_trained(const TrainedModel& m, const TrainResult& result, const std::filesystem::path& ckpt);
TrainedModel load_trained(const std::filesystem::path& ckpt);

// Everything lands under `out`; models already present under out/models are
// reused. Progress goes to `log`.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out, std::size_t jobs,
                    std::ostream& log);

// Recomputes the table from saved hypotheses, references and costs.
std::vector<EvalReport> build_report(const std::filesystem::path& dir);
void write_report(std::ostream& os, std::span<const EvalReport> rows);

}  // namespace reldec
