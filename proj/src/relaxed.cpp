#include "reldec/relaxed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "reldec/parallel.hpp"

namespace reldec {

using ad::Var;

std::string algorithm_name(Algorithm a) { return a == Algorithm::kEG ? "eg" : "sgd"; }

Algorithm parse_algorithm(const std::string& s) {
  if (s == "eg") return Algorithm::kEG;
  if (s == "sgd") return Algorithm::kSGD;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected eg or sgd)");
}

std::string init_name(InitKind k) {
  switch (k) {
    case InitKind::kUniform: return "uniform";
    case InitKind::kGreedy: return "greedy";
    case InitKind::kBeam: return "beam";
    case InitKind::kRerank: return "rerank";
  }
  return "uniform";
}

InitKind parse_init(const std::string& s) {
  if (s == "uniform") return InitKind::kUniform;
  if (s == "greedy") return InitKind::kGreedy;
  if (s == "beam") return InitKind::kBeam;
  if (s == "rerank") return InitKind::kRerank;
  throw std::invalid_argument("unknown initialization '" + s + "' (expected uniform, greedy, beam or rerank)");
}

void OptimConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("step size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (max_iter < 1) throw std::invalid_argument("max iterations must be at least 1");
  if (!(anneal > 0.0 && anneal <= 1.0)) throw std::invalid_argument("annealing factor must lie in (0, 1]");
  if ((init == InitKind::kBeam || init == InitKind::kRerank) && beam_width == 0) {
    throw std::invalid_argument("beam width must be at least 1");
  }
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be non-negative");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
}

// ---- single steps ------------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shapes " + a.shape_string() + " and " + b.shape_string() +
                                " differ");
  }
}

double frobenius(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

RelaxedSequence eg_step(const RelaxedSequence& y, const Tensor& grad, double eta) {
  require_same_shape(y, grad, "eg_step");
  if (y.rank() != 2) throw std::invalid_argument("eg_step: iterate must be a matrix");
  if (!grad.all_finite()) throw std::domain_error("eg_step: non-finite gradient");
  Tensor out = Tensor::zeros_like(y);
  std::vector<double> logits(y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const auto yi = y.row(i);
    const auto gi = grad.row(i);
    for (std::size_t w = 0; w < logits.size(); ++w) {
      logits[w] = std::log(std::max(yi[w], 1e-300)) - eta * gi[w];
      if (!std::isfinite(logits[w])) throw std::domain_error("eg_step: update overflowed; step size too large");
    }
    const auto lp = ad::log_softmax_values(logits);
    auto oi = out.row(i);
    double z = 0.0;
    for (std::size_t w = 0; w < lp.size(); ++w) z += oi[w] = std::exp(lp[w]);
    if (!(z > 0.0)) throw std::domain_error("eg_step: row " + std::to_string(i) + " lost all mass; step size too large");
    for (double& v : oi) v /= z;
  }
  return out;
}

Tensor momentum_fold(const Tensor& prev, const Tensor& current, double gamma, double eta) {
  require_same_shape(prev, current, "momentum_fold");
  Tensor out = Tensor::zeros_like(current);
  auto o = out.data();
  const auto p = prev.data();
  const auto c = current.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = gamma * p[k] + eta * c[k];
  return out;
}

RelaxedSequence softmax_rows(const LogitSequence& r) {
  if (r.rank() != 2) throw std::invalid_argument("logit sequence must be a matrix, got " + r.shape_string());
  Tensor out = Tensor::zeros_like(r);
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const auto p = ad::softmax_values(r.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

LogitCostGrad logit_cost_grad(const ObjectiveSpec& spec, const LogitSequence& r) {
  spec.validate();
  if (r.rank() != 2 || r.cols() != spec.target_vocab()) {
    throw std::invalid_argument("logits of shape " + r.shape_string() + " do not match target vocabulary " +
                                std::to_string(spec.target_vocab()));
  }
  ad::Tape tape;
  Var rv = tape.variable_ref(r);
  Var cost = objective_cost(tape, spec, ad::softmax_rows(rv));
  const Var wrt[] = {rv};
  LogitCostGrad out;
  out.cost = cost.value()[0];
  out.grad = std::move(tape.gradients(cost, wrt)[0]);
  return out;
}

LogitSequence sgd_step(const LogitSequence& r, const ObjectiveSpec& spec, double eta) {
  const Tensor g = logit_cost_grad(spec, r).grad;
  Tensor out = r;
  auto o = out.data();
  const auto gd = g.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] -= eta * gd[k];
  return out;
}

TokenIds round_solution(const RelaxedSequence& y) {
  TokenIds out;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const auto row = y.row(i);
    const auto it = std::max_element(row.begin(), row.end());
    out.push_back(static_cast<int>(it - row.begin()));
    if (out.back() == kEos) break;
  }
  return out;
}

double entropy_diagnostic(const RelaxedSequence& y) {
  double h = 0.0;
  for (double p : y.data())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

// ---- initialization -------------------------------------------------------------

std::size_t uniform_length(std::size_t source_length) {
  return static_cast<std::size_t>(std::lround(1.2 * static_cast<double>(source_length))) + 1;
}

Tensor prediction_rows(const ModelParams& model, std::span<const int> x, std::span<const int> tokens, bool logits) {
  if (model.config.side != Side::kSourceToTarget) {
    throw std::invalid_argument("prediction rows need a source-to-target model");
  }
  if (tokens.empty()) throw std::invalid_argument("prediction rows need a nonempty hypothesis");
  const TokenIds ordered = to_model_order(model, tokens);
  const std::size_t n = ordered.size();
  const std::size_t V = model.config.tgt_vocab;

  ad::Tape tape;
  ModelGraph g = ModelGraph::bind(tape, model, false);
  EncoderStates enc = encode(g, x);
  DecoderState state = initial_state(g, enc);
  Var prev = target_embedding(g, kBos);
  Tensor model_rows({n, V});
  for (std::size_t i = 0; i < n; ++i) {
    DecoderStep step = decoder_step(g, prev, state, enc);
    const auto z = step.logits.value().data();
    auto dst = model_rows.row(i);
    if (logits) {
      std::copy(z.begin(), z.end(), dst.begin());
    } else {
      const auto p = ad::softmax_values(z);
      std::copy(p.begin(), p.end(), dst.begin());
    }
    state = step.state;
    prev = target_embedding(g, ordered[i]);
  }
  if (model.config.direction == Direction::kLeftToRight) return model_rows;
  Tensor surface({n, V});
  const auto order = reverse_keep_last_order(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = model_rows.row(order[i]);
    std::copy(src.begin(), src.end(), surface.row(i).begin());
  }
  return surface;
}

Initialization init_relaxed(const ObjectiveSpec& spec, const OptimConfig& config) {
  spec.validate();
  config.validate();
  const ModelParams& model = *spec.primary;
  const bool logits = config.algorithm == Algorithm::kSGD;
  Initialization init;

  if (config.init == InitKind::kUniform) {
    const std::size_t n = config.length ? config.length : uniform_length(spec.source.size());
    const std::size_t V = spec.target_vocab();
    init.rows = Tensor({n, V});
    if (!logits) std::fill(init.rows.storage().begin(), init.rows.storage().end(), 1.0 / static_cast<double>(V));
    return init;
  }

  const std::size_t max_len = default_max_length(spec.source.size());
  switch (config.init) {
    case InitKind::kGreedy: init.tokens = greedy_decode(model, spec.source, max_len).tokens; break;
    case InitKind::kBeam: {
      BeamOptions opt{config.beam_width, max_len, 1};
      init.tokens = beam_decode(model, spec.source, opt).front().tokens;
      break;
    }
    case InitKind::kRerank: {
      BeamOptions opt{config.beam_width, max_len, config.beam_width};
      NBestList nbest = beam_decode(model, spec.source, opt);
      for (auto& h : nbest) h.tokens = to_surface_order(model, h.tokens);
      const auto scorers = objective_scorers(spec);
      init.tokens = rerank(nbest, spec.source, scorers).best.tokens;
      init.rows = prediction_rows(model, spec.source, init.tokens, logits);
      return init;
    }
    case InitKind::kUniform: break;
  }
  init.tokens = to_surface_order(model, init.tokens);
  init.rows = prediction_rows(model, spec.source, init.tokens, logits);
  return init;
}

// ---- decoding -------------------------------------------------------------------

DecodeResult relaxed_decode(const ObjectiveSpec& spec, const OptimConfig& config, const IterateObserver& observer) {
  return relaxed_decode_from(spec, config, init_relaxed(spec, config), observer);
}

DecodeResult relaxed_decode_from(const ObjectiveSpec& spec, const OptimConfig& config, const Initialization& init,
                                 const IterateObserver& observer) {
  spec.validate();
  config.validate();
  const bool sgd = config.algorithm == Algorithm::kSGD;

  Tensor param = init.rows;  // simplex rows for EG, logits for SGD
  Tensor y = sgd ? softmax_rows(param) : param;
  check_simplex_rows(y);

  DecodeResult result;
  result.length = y.rows();

  auto evaluate = [&](const Tensor& p) -> std::pair<double, Tensor> {
    if (sgd) {
      LogitCostGrad cg = logit_cost_grad(spec, p);
      return {cg.cost, std::move(cg.grad)};
    }
    CostGrad cg = relaxed_cost_grad(spec, p);
    return {cg.cost, std::move(cg.grad)};
  };
  auto record = [&](std::size_t t, double cost, const Tensor& grad) {
    if (observer) observer(t, y);
    result.trace.push_back({t, cost, discrete_cost(spec, round_solution(y)), frobenius(grad), entropy_diagnostic(y)});
  };

  const Tensor start = y;
  auto [cost, grad] = evaluate(param);
  record(0, cost, grad);
  result.init_cost = cost;
  result.cost = cost;
  Tensor best = y;

  Tensor velocity = Tensor::zeros_like(param);
  double prev_cost = cost;
  std::size_t small = 0;
  double eta = config.eta;
  for (std::size_t t = 1; t <= config.max_iter; ++t) {
    velocity = momentum_fold(velocity, grad, config.momentum, eta);
    if (sgd) {
      auto p = param.data();
      const auto v = velocity.data();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= v[k];
      if (!param.all_finite()) throw std::domain_error("sgd step overflowed; step size too large");
      y = softmax_rows(param);
    } else {
      param = eg_step(param, velocity, 1.0);
      y = param;
    }
    std::tie(cost, grad) = evaluate(param);
    record(t, cost, grad);
    result.iterations = t;
    if (cost < result.cost) {
      result.cost = cost;
      result.best_iteration = t;
      best = y;
    }
    small = std::abs(cost - prev_cost) < config.tolerance ? small + 1 : 0;
    prev_cost = cost;
    if (small >= config.patience) {
      result.converged = true;
      break;
    }
    eta *= config.anneal;
  }

  result.tokens = round_solution(best);
  result.discrete_cost = discrete_cost(spec, result.tokens);
  result.init_tokens = init.tokens.empty() ? round_solution(start) : init.tokens;
  result.init_discrete_cost = discrete_cost(spec, result.init_tokens);
  if (result.init_discrete_cost < result.discrete_cost) {
    result.tokens = result.init_tokens;
    result.discrete_cost = result.init_discrete_cost;
    result.fell_back = true;
  }
  return result;
}

std::size_t iterations_to_within(const DecodeTrace& trace, double rel) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  double best = trace.front().cost;
  for (const auto& r : trace) best = std::min(best, r.cost);
  for (const auto& r : trace)
    if (r.cost - best <= rel * std::abs(best)) return r.t;
  return trace.back().t;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw std::invalid_argument("log grid needs 0 < lo <= hi and n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < n; ++k) out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<LineSearchPoint> line_search(std::span<const ObjectiveSpec> specs, const OptimConfig& base,
                                         std::span<const double> etas, std::size_t jobs) {
  if (specs.empty()) throw std::invalid_argument("line search needs at least one sentence");
  std::vector<Initialization> inits(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) { inits[i] = init_relaxed(specs[i], base); });

  std::vector<LineSearchPoint> out;
  for (double eta : etas) {
    OptimConfig c = base;
    c.eta = eta;
    std::vector<double> costs(specs.size());
    parallel_for(specs.size(), jobs, [&](std::size_t i) {
      const DecodeResult r = relaxed_decode_from(specs[i], c, inits[i]);
      costs[i] = r.cost / static_cast<double>(r.length);
    });
    double total = 0.0;
    for (double v : costs) total += v;
    out.push_back({eta, total / static_cast<double>(costs.size())});
  }
  return out;
}

double best_eta(std::span<const LineSearchPoint> points) {
  if (points.empty()) throw std::invalid_argument("no line search points");
  const auto it = std::min_element(points.begin(), points.end(),
                                   [](const auto& a, const auto& b) { return a.mean_cost < b.mean_cost; });
  return it->eta;
}

void write_trace_header(std::ostream& os) { os << "sentence,t,cost,discrete_cost,grad_norm,entropy\n"; }

void write_trace(std::ostream& os, std::size_t sentence_id, const DecodeTrace& trace) {
  os << std::setprecision(10);
  for (const auto& r : trace) {
    os << sentence_id << ',' << r.t << ',' << r.cost << ',' << r.discrete_cost << ',' << r.grad_norm << ','
       << r.entropy << '\n';
  }
}

}  // namespace reldec
