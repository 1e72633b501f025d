#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reldec/objective.hpp"
#include "reldec/search.hpp"
#include "reldec/tensor.hpp"

namespace reldec {

// ℓ x |V_T|, each row on the probability simplex.
using RelaxedSequence = Tensor;
// ℓ x |V_T| unconstrained logits; the iterate is softmax of each row.
using LogitSequence = Tensor;

enum class Algorithm { kEG, kSGD };
enum class InitKind { kUniform, kGreedy, kBeam, kRerank };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
std::string init_name(InitKind k);
InitKind parse_init(const std::string& s);

struct OptimConfig {
  Algorithm algorithm = Algorithm::kEG;
  double eta = 50.0;
  double momentum = 0.9;  // 0 disables
  std::size_t max_iter = 100;
  InitKind init = InitKind::kGreedy;
  std::size_t beam_width = 5;  // beam and rerank init
  double anneal = 1.0;         // eta_t = eta * anneal^(t-1)
  std::size_t length = 0;      // uniform init only; 0 means round(1.2|x|)+1
  double tolerance = 1e-6;
  std::size_t patience = 3;  // consecutive small changes before stopping

  void validate() const;
};

struct TraceRow {
  std::size_t t = 0;
  double cost = 0.0;           // Q at the iterate
  double discrete_cost = 0.0;  // objective at the rounded iterate
  double grad_norm = 0.0;
  double entropy = 0.0;
};
using DecodeTrace = std::vector<TraceRow>;

struct DecodeResult {
  TokenIds tokens;  // surface order, ends at the first eos when there is one
  double cost = 0.0;           // best continuous Q over t = 0..T
  double discrete_cost = 0.0;  // objective at `tokens`
  std::size_t length = 0;      // ℓ, rows of the iterate
  std::size_t best_iteration = 0;
  std::size_t iterations = 0;  // updates performed
  bool converged = false;
  DecodeTrace trace;

  TokenIds init_tokens;  // the initializer's hypothesis; uniform init rounds the t = 0 rows
  double init_cost = 0.0;
  double init_discrete_cost = 0.0;
  // The rounded best iterate scored worse than init_tokens, which were
  // returned instead.
  bool fell_back = false;
};

// ---- single steps ----------------------------------------------------------

// y'_i(w) ∝ y_i(w) exp(-eta g_i(w)), computed in log space.
RelaxedSequence eg_step(const RelaxedSequence& y, const Tensor& grad, double eta);
// gamma * prev + eta * current.
Tensor momentum_fold(const Tensor& prev, const Tensor& current, double gamma, double eta);

struct LogitCostGrad {
  double cost = 0.0;
  Tensor grad;  // dQ/dr through the row softmax
};
LogitCostGrad logit_cost_grad(const ObjectiveSpec& spec, const LogitSequence& r);
// r - eta * dQ/dr.
LogitSequence sgd_step(const LogitSequence& r, const ObjectiveSpec& spec, double eta);

RelaxedSequence softmax_rows(const LogitSequence& r);

// Per row argmax (lowest index on ties), cut after the first eos.
TokenIds round_solution(const RelaxedSequence& y);
// Sum of row entropies in nats.
double entropy_diagnostic(const RelaxedSequence& y);

// ---- initialization ---------------------------------------------------------

struct Initialization {
  TokenIds tokens;  // hypothesis in surface order; empty for uniform
  Tensor rows;      // EG: simplex rows; SGD: logits
};

std::size_t uniform_length(std::size_t source_length);

// Model-predicted distributions (or logits) along `tokens`, teacher-forced
// under `model`; both in surface order.
Tensor prediction_rows(const ModelParams& model, std::span<const int> x, std::span<const int> tokens, bool logits);

Initialization init_relaxed(const ObjectiveSpec& spec, const OptimConfig& config);

// ---- decoding ---------------------------------------------------------------

// Called with every iterate (simplex rows), t = 0 included.
using IterateObserver = std::function<void(std::size_t t, const RelaxedSequence& y)>;

DecodeResult relaxed_decode(const ObjectiveSpec& spec, const OptimConfig& config,
                            const IterateObserver& observer = {});
// Same, from an explicit starting point (rows or logits per the algorithm).
DecodeResult relaxed_decode_from(const ObjectiveSpec& spec, const OptimConfig& config, const Initialization& init,
                                 const IterateObserver& observer = {});

// First t whose cost is within `rel` of the best cost in the trace.
std::size_t iterations_to_within(const DecodeTrace& trace, double rel);

// n points spaced evenly in log space over [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct LineSearchPoint {
  double eta = 0.0;
  double mean_cost = 0.0;  // mean best Q / ℓ over the sentences
};
std::vector<LineSearchPoint> line_search(std::span<const ObjectiveSpec> specs, const OptimConfig& base,
                                         std::span<const double> etas, std::size_t jobs = 1);
double best_eta(std::span<const LineSearchPoint> points);

// "sentence,t,cost,discrete_cost,grad_norm,entropy" rows.
void write_trace_header(std::ostream& os);
void write_trace(std::ostream& os, std::size_t sentence_id, const DecodeTrace& trace);

}  // namespace reldec
