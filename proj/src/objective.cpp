#include "reldec/objective.hpp"

#include <stdexcept>

namespace reldec {

using ad::Var;

std::string objective_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kSingle: return "single";
    case ObjectiveKind::kBidirectional: return "bidirectional";
    case ObjectiveKind::kBilingual: return "bilingual";
  }
  return "single";
}

ObjectiveKind parse_objective(const std::string& s) {
  if (s == "single") return ObjectiveKind::kSingle;
  if (s == "bidirectional") return ObjectiveKind::kBidirectional;
  if (s == "bilingual") return ObjectiveKind::kBilingual;
  throw std::invalid_argument("unknown objective '" + s + "' (expected single, bidirectional or bilingual)");
}

void ObjectiveSpec::validate() const {
  if (!primary) throw std::invalid_argument("objective has no primary model");
  if (source.empty()) throw std::invalid_argument("objective has an empty source sentence");
  if (primary->config.side != Side::kSourceToTarget) {
    throw std::invalid_argument("primary model must translate source to target");
  }
  if (kind == ObjectiveKind::kSingle) return;
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!secondary) throw std::invalid_argument(objective_name(kind) + " objective needs a second model");
  const ModelConfig& a = primary->config;
  const ModelConfig& b = secondary->config;
  if (kind == ObjectiveKind::kBidirectional) {
    if (b.side != Side::kSourceToTarget || a.direction == b.direction) {
      throw std::invalid_argument("bidirectional objective needs one l2r and one r2l source-to-target model");
    }
    if (a.src_vocab != b.src_vocab || a.tgt_vocab != b.tgt_vocab) {
      throw std::invalid_argument("bidirectional models disagree on vocabulary sizes");
    }
  } else {
    if (b.side != Side::kTargetToSource) throw std::invalid_argument("bilingual objective needs a target-to-source model");
    if (a.tgt_vocab != b.src_vocab || a.src_vocab != b.tgt_vocab) {
      throw std::invalid_argument("bilingual models disagree on vocabulary sizes: " + std::to_string(a.tgt_vocab) +
                                  " vs " + std::to_string(b.src_vocab) + " target words");
    }
  }
}

std::vector<WeightedModel> objective_terms(const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::kSingle: return {{spec.primary, 1.0}};
    case ObjectiveKind::kBidirectional: {
      const bool primary_r2l = spec.primary->config.direction == Direction::kRightToLeft;
      const ModelParams* r2l = primary_r2l ? spec.primary : spec.secondary;
      const ModelParams* l2r = primary_r2l ? spec.secondary : spec.primary;
      return {{r2l, spec.alpha}, {l2r, 1.0 - spec.alpha}};
    }
    case ObjectiveKind::kBilingual: return {{spec.primary, spec.alpha}, {spec.secondary, 1.0 - spec.alpha}};
  }
  return {};
}

std::vector<Scorer> objective_scorers(const ObjectiveSpec& spec) {
  std::vector<Scorer> out;
  for (const auto& t : objective_terms(spec)) out.push_back({t.model, t.weight});
  return out;
}

Var term_cost(ad::Tape& tape, const ModelParams& model, std::span<const int> x, Var rows) {
  ModelGraph g = ModelGraph::bind(tape, model, false);
  const std::size_t n = rows.value().rows();
  const bool r2l = model.config.direction == Direction::kRightToLeft;

  if (model.config.side == Side::kSourceToTarget) {
    EncoderStates enc = encode(g, x);
    Var ordered = rows;
    if (r2l) {
      const auto order = reverse_keep_last_order(n);
      ordered = ad::gather_rows(rows, order);
    }
    return ad::scale(relaxed_target_log_prob(g, enc, ordered), -1.0);
  }

  Var input = rows;
  if (n > 1) {
    std::vector<std::size_t> keep(n - 1);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    input = ad::gather_rows(rows, keep);
  }
  EncoderStates enc = encode_relaxed(g, input);
  TokenIds target(x.begin(), x.end());
  target.push_back(kEos);
  if (r2l) target = reverse_keep_last(target);
  return ad::scale(target_log_prob(g, enc, target), -1.0);
}

Var objective_cost(ad::Tape& tape, const ObjectiveSpec& spec, Var rows) {
  if (spec.kind == ObjectiveKind::kSingle) return term_cost(tape, *spec.primary, spec.source, rows);
  std::vector<Var> parts;
  for (const auto& t : objective_terms(spec)) {
    if (t.weight != 0.0) parts.push_back(ad::scale(term_cost(tape, *t.model, spec.source, rows), t.weight));
  }
  return ad::add_n(parts);
}

namespace {

void check_rows(const ObjectiveSpec& spec, const Tensor& rows) {
  spec.validate();
  check_simplex_rows(rows);
  if (rows.cols() != spec.target_vocab()) {
    throw std::invalid_argument("relaxed rows of shape " + rows.shape_string() + " do not match target vocabulary " +
                                std::to_string(spec.target_vocab()));
  }
}

}  // namespace

double relaxed_cost(const ObjectiveSpec& spec, const Tensor& rows) {
  check_rows(spec, rows);
  ad::Tape tape;
  return objective_cost(tape, spec, tape.constant_ref(rows)).value()[0];
}

CostGrad relaxed_cost_grad(const ObjectiveSpec& spec, const Tensor& rows) {
  check_rows(spec, rows);
  ad::Tape tape;
  Var y = tape.variable_ref(rows);
  Var cost = objective_cost(tape, spec, y);
  const Var wrt[] = {y};
  CostGrad out;
  out.cost = cost.value()[0];
  out.grad = std::move(tape.gradients(cost, wrt)[0]);
  return out;
}

Tensor relaxed_grad(const ObjectiveSpec& spec, const Tensor& rows) { return relaxed_cost_grad(spec, rows).grad; }

double bidirectional_cost(const Tensor& rows, const ObjectiveSpec& spec) {
  if (spec.kind != ObjectiveKind::kBidirectional) throw std::invalid_argument("objective is not bidirectional");
  return relaxed_cost(spec, rows);
}

double bilingual_cost(const Tensor& rows, const ObjectiveSpec& spec) {
  if (spec.kind != ObjectiveKind::kBilingual) throw std::invalid_argument("objective is not bilingual");
  return relaxed_cost(spec, rows);
}

Tensor ensemble_grad(const Tensor& rows, const ObjectiveSpec& spec) {
  if (spec.kind == ObjectiveKind::kSingle) throw std::invalid_argument("objective is not an ensemble");
  return relaxed_grad(spec, rows);
}

double discrete_cost(const ObjectiveSpec& spec, std::span<const int> tokens) {
  spec.validate();
  double total = 0.0;
  for (const auto& t : objective_terms(spec)) {
    if (t.weight != 0.0) total += t.weight * -force_score(*t.model, spec.source, tokens);
  }
  return total;
}

}  // namespace reldec
