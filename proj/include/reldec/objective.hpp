#pragma once

#include <span>
#include <string>
#include <vector>

#include "reldec/autodiff.hpp"
#include "reldec/model.hpp"
#include "reldec/search.hpp"
#include "reldec/tensor.hpp"

namespace reldec {

enum class ObjectiveKind { kSingle, kBidirectional, kBilingual };
std::string objective_name(ObjectiveKind k);
ObjectiveKind parse_objective(const std::string& s);

// What relaxed decoding minimizes for one source sentence.
//   single:        primary only
//   bidirectional: alpha * r2l + (1 - alpha) * l2r (either may be primary)
//   bilingual:     alpha * s2t(primary)   + (1 - alpha) * t2s(secondary)
// Every term is a negative log-probability. Relaxed rows are always in
// surface (left-to-right) target order and end in the eos slot.
struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kSingle;
  double alpha = 0.5;
  const ModelParams* primary = nullptr;
  const ModelParams* secondary = nullptr;
  TokenIds source;  // x, without eos

  std::size_t target_vocab() const { return primary->config.tgt_vocab; }
  void validate() const;
};

struct WeightedModel {
  const ModelParams* model;
  double weight;
};
// Terms with their interpolation weights; zero-weight terms are kept.
std::vector<WeightedModel> objective_terms(const ObjectiveSpec& spec);
// The same weights as rerank scorers.
std::vector<Scorer> objective_scorers(const ObjectiveSpec& spec);

// -log P_model(rows | x) for one term, on an existing tape. Handles r2l
// (row reversal with the eos slot kept last) and t2s (rows without their eos
// slot become a relaxed source, x + eos is force-scored).
ad::Var term_cost(ad::Tape& tape, const ModelParams& model, std::span<const int> x, ad::Var rows);
// Weighted sum of the terms; zero-weight terms are skipped.
ad::Var objective_cost(ad::Tape& tape, const ObjectiveSpec& spec, ad::Var rows);

// Rows must lie on the simplex.
double relaxed_cost(const ObjectiveSpec& spec, const Tensor& rows);

struct CostGrad {
  double cost = 0.0;
  Tensor grad;  // same shape as the rows
};
CostGrad relaxed_cost_grad(const ObjectiveSpec& spec, const Tensor& rows);
Tensor relaxed_grad(const ObjectiveSpec& spec, const Tensor& rows);

double bidirectional_cost(const Tensor& rows, const ObjectiveSpec& spec);
double bilingual_cost(const Tensor& rows, const ObjectiveSpec& spec);
Tensor ensemble_grad(const Tensor& rows, const ObjectiveSpec& spec);

// Same weighting over discrete tokens (surface order), via force_score.
double discrete_cost(const ObjectiveSpec& spec, std::span<const int> tokens);

}  // namespace reldec
