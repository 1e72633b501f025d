#include "reldec/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "reldec/parallel.hpp"
#include "reldec/svg.hpp"

namespace reldec {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string method_name(Method m) {
  switch (m) {
    case Method::kGreedy: return "greedy";
    case Method::kBeam: return "beam";
    case Method::kRerank: return "rerank";
    case Method::kEG: return "eg";
    case Method::kSGD: return "sgd";
  }
  return "greedy";
}

Method parse_method(const std::string& s) {
  if (s == "greedy") return Method::kGreedy;
  if (s == "beam") return Method::kBeam;
  if (s == "rerank") return Method::kRerank;
  if (s == "eg") return Method::kEG;
  if (s == "sgd") return Method::kSGD;
  throw std::invalid_argument("unknown method '" + s + "' (expected greedy, beam, rerank, eg or sgd)");
}

void DecoderSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("decoder without a name");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '+' || c == '.')) {
      throw std::invalid_argument("decoder name '" + name + "' may only use letters, digits and - _ + .");
    }
  }
  if (width == 0) throw std::invalid_argument("decoder " + name + ": beam width must be at least 1");
  if (nbest == 0 || nbest > width) throw std::invalid_argument("decoder " + name + ": n-best must be in [1, width]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("decoder " + name + ": alpha must lie in [0, 1]");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("decoder " + name + ": alpha grid outside [0, 1]");
  if ((method == Method::kGreedy || method == Method::kBeam) && objective != ObjectiveKind::kSingle) {
    throw std::invalid_argument("decoder " + name + ": greedy and beam decode a single model");
  }
  if (relaxed()) optim.validate();
}

ObjectiveSpec make_objective(const DecoderSpec& spec, const ModelSet& models, std::span<const int> x) {
  auto need = [&](const ModelParams* m, const char* kind) -> const ModelParams* {
    if (!m) throw std::invalid_argument("decoder " + spec.name + " needs the " + kind + " model");
    return m;
  };
  const bool l2r = spec.direction == Direction::kLeftToRight;
  ObjectiveSpec o;
  o.kind = spec.objective;
  o.alpha = spec.alpha;
  o.primary = l2r ? need(models.l2r, "l2r") : need(models.r2l, "r2l");
  if (o.kind == ObjectiveKind::kBidirectional) o.secondary = l2r ? need(models.r2l, "r2l") : need(models.l2r, "l2r");
  if (o.kind == ObjectiveKind::kBilingual) o.secondary = need(models.t2s, "t2s");
  o.source.assign(x.begin(), x.end());
  o.validate();
  return o;
}

SentenceResult decode_sentence(const DecoderSpec& spec, const ModelSet& models, std::span<const int> x) {
  const ObjectiveSpec objective = make_objective(spec, models, x);
  const ModelParams& model = *objective.primary;
  SentenceResult r;

  switch (spec.method) {
    case Method::kGreedy:
      r.tokens = to_surface_order(model, greedy_decode(model, x, default_max_length(x.size())).tokens);
      break;
    case Method::kBeam:
    case Method::kRerank: {
      const bool rerank_all = spec.method == Method::kRerank;
      BeamOptions opt{spec.width, 0, rerank_all ? spec.width : spec.nbest};
      r.nbest = beam_decode(model, x, opt);
      for (auto& h : r.nbest) h.tokens = to_surface_order(model, h.tokens);
      if (rerank_all) {
        const auto scorers = objective_scorers(objective);
        RerankResult rr = rerank(r.nbest, x, scorers);
        for (std::size_t i = 0; i < r.nbest.size(); ++i) r.nbest[i].log_prob = rr.combined_scores[i];
        r.tokens = rr.best.tokens;
      } else {
        r.tokens = r.nbest.front().tokens;
      }
      break;
    }
    case Method::kEG:
    case Method::kSGD: {
      OptimConfig oc = spec.optim;
      oc.algorithm = spec.method == Method::kEG ? Algorithm::kEG : Algorithm::kSGD;
      DecodeResult d = relaxed_decode(objective, oc);
      r.tokens = d.tokens;
      r.length = d.length;
      r.continuous = d.cost / static_cast<double>(d.length);
      r.discrete = d.discrete_cost / static_cast<double>(d.tokens.size());
      r.trace = std::move(d.trace);
      r.fell_back = d.fell_back;
      return r;
    }
  }
  r.length = r.tokens.size();
  r.discrete = normalized_discrete_cost(objective, r.tokens);
  r.continuous = r.discrete;
  return r;
}

std::vector<SentenceResult> decode_all(const DecoderSpec& spec, const ModelSet& models,
                                       const std::vector<TokenIds>& sources, std::size_t jobs) {
  spec.validate();
  std::vector<SentenceResult> out(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) { out[i] = decode_sentence(spec, models, sources[i]); });
  return out;
}

// ---- configuration ----------------------------------------------------------------

namespace {

void check_keys(const pt::ptree& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section) {
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in section [" + name + "]");
  }
}

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(std::stod(tok));
  return out;
}

template <class T>
T get_or(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto child = tree.get_child_optional(pt::ptree::path_type(key, '/'));
  if (!child) return fallback;
  try {
    return child->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw std::invalid_argument("bad value '" + child->data() + "' for key " + key);
  }
}

const pt::ptree& section_or_empty(const pt::ptree& root, const std::string& name) {
  static const pt::ptree empty;
  const auto it = root.find(name);
  return it == root.not_found() ? empty : it->second;
}

DecoderSpec parse_decoder(const std::string& name, const pt::ptree& s) {
  check_keys(s, "decoder." + name,
             {"method", "direction", "objective", "alpha", "alpha_grid", "width", "nbest", "init", "eta", "momentum",
              "max_iter", "anneal", "length", "tolerance", "patience"});
  DecoderSpec d;
  d.name = name;
  d.method = parse_method(get_or<std::string>(s, "method", "greedy"));
  d.direction = parse_direction(get_or<std::string>(s, "direction", "l2r"));
  d.objective = parse_objective(get_or<std::string>(s, "objective", "single"));
  d.alpha = get_or(s, "alpha", 0.5);
  d.alpha_grid = parse_doubles(get_or<std::string>(s, "alpha_grid", ""));
  d.width = get_or<std::size_t>(s, "width", 5);
  d.nbest = get_or<std::size_t>(s, "nbest", 1);
  d.optim.init = parse_init(get_or<std::string>(s, "init", "greedy"));
  d.optim.beam_width = d.width;
  d.optim.eta = get_or(s, "eta", 50.0);
  d.optim.momentum = get_or(s, "momentum", 0.9);
  d.optim.max_iter = get_or<std::size_t>(s, "max_iter", 100);
  d.optim.anneal = get_or(s, "anneal", 1.0);
  d.optim.length = get_or<std::size_t>(s, "length", 0);
  d.optim.tolerance = get_or(s, "tolerance", 1e-6);
  d.optim.patience = get_or<std::size_t>(s, "patience", 3);
  d.optim.algorithm = d.method == Method::kSGD ? Algorithm::kSGD : Algorithm::kEG;
  d.validate();
  return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& is) {
  pt::ptree root;
  try {
    pt::read_ini(is, root);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig c;
  std::set<std::string> seen;
  for (const auto& [name, section] : root) {
    if (!seen.insert(name).second) throw std::invalid_argument("duplicate section [" + name + "]");
    if (name.rfind("decoder.", 0) == 0) {
      c.decoders.push_back(parse_decoder(name.substr(8), section));
    } else if (!std::set<std::string>{"experiment", "task", "model", "train", "convergence", "line_search"}.count(
                   name)) {
      throw std::invalid_argument("unknown section [" + name + "]");
    }
  }

  const auto& ex = section_or_empty(root, "experiment");
  check_keys(ex, "experiment", {"seed", "min_freq"});
  c.seed = get_or<std::uint64_t>(ex, "seed", 7);
  c.min_freq = get_or<std::size_t>(ex, "min_freq", 1);

  const auto& task = section_or_empty(root, "task");
  check_keys(task, "task", {"kind", "pairs", "vocab", "min_length", "max_length", "swaps", "noise_rate"});
  c.task.kind = parse_task(get_or<std::string>(task, "kind", "noisy-cipher"));
  c.task.pairs = get_or<std::size_t>(task, "pairs", 2000);
  c.task.vocab_size = get_or<std::size_t>(task, "vocab", 20);
  c.task.min_length = get_or<std::size_t>(task, "min_length", 3);
  c.task.max_length = get_or<std::size_t>(task, "max_length", 10);
  c.task.swaps_per_sentence = get_or<std::size_t>(task, "swaps", 1);
  c.task.noise_rate = get_or(task, "noise_rate", 0.1);
  c.task.seed = c.seed;

  const auto& model = section_or_empty(root, "model");
  check_keys(model, "model", {"embed", "hidden", "attention"});
  c.model.embed = get_or<std::size_t>(model, "embed", 32);
  c.model.hidden = get_or<std::size_t>(model, "hidden", 32);
  c.model.attention = get_or<std::size_t>(model, "attention", 16);

  const auto& train = section_or_empty(root, "train");
  check_keys(train, "train", {"epochs", "learning_rate", "batch_size", "clip_norm", "patience", "init_scale"});
  c.train.max_epochs = get_or<std::size_t>(train, "epochs", 30);
  c.train.learning_rate = get_or(train, "learning_rate", 0.3);
  c.train.batch_size = get_or<std::size_t>(train, "batch_size", 1);
  c.train.clip_norm = get_or(train, "clip_norm", 5.0);
  c.train.patience = get_or<std::size_t>(train, "patience", 3);
  c.train.init_scale = get_or(train, "init_scale", 0.08);
  c.train.seed = c.seed;

  const auto& conv = section_or_empty(root, "convergence");
  check_keys(conv, "convergence", {"enabled", "sentences", "eg_eta", "sgd_eta", "momentum", "max_iter"});
  c.convergence.enabled = get_or(conv, "enabled", false);
  c.convergence.sentences = get_or<std::size_t>(conv, "sentences", 20);
  c.convergence.eg_eta = get_or(conv, "eg_eta", 1.0);
  c.convergence.sgd_eta = get_or(conv, "sgd_eta", 3.0);
  c.convergence.momentum = get_or(conv, "momentum", 0.9);
  c.convergence.max_iter = get_or<std::size_t>(conv, "max_iter", 100);

  const auto& ls = section_or_empty(root, "line_search");
  check_keys(ls, "line_search", {"enabled", "sentences", "lo", "hi", "points", "inits", "momentum", "max_iter"});
  c.line_search.enabled = get_or(ls, "enabled", false);
  c.line_search.sentences = get_or<std::size_t>(ls, "sentences", 20);
  c.line_search.lo = get_or(ls, "lo", 10.0);
  c.line_search.hi = get_or(ls, "hi", 400.0);
  c.line_search.points = get_or<std::size_t>(ls, "points", 6);
  c.line_search.momentum = get_or(ls, "momentum", 0.9);
  c.line_search.max_iter = get_or<std::size_t>(ls, "max_iter", 100);
  if (const auto inits = get_or<std::string>(ls, "inits", ""); !inits.empty()) {
    c.line_search.inits.clear();
    std::istringstream in(inits);
    std::string tok;
    while (in >> tok) c.line_search.inits.push_back(parse_init(tok));
  }

  std::set<std::string> names;
  for (const auto& d : c.decoders)
    if (!names.insert(d.name).second) throw std::invalid_argument("duplicate decoder name " + d.name);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read experiment config " + path.string());
  return parse_experiment_config(is);
}

// ---- artifacts ------------------------------------------------------------------------

void write_splits(const CorpusSplits& splits, const fs::path& dir) {
  fs::create_directories(dir);
  write_corpus(splits.train, dir / "train.src", dir / "train.tgt");
  write_corpus(splits.dev, dir / "dev.src", dir / "dev.tgt");
  write_corpus(splits.test, dir / "test.src", dir / "test.tgt");
}

CorpusSplits read_splits(const fs::path& dir) {
  CorpusSplits s;
  s.train = read_corpus(dir / "train.src", dir / "train.tgt");
  s.dev = read_corpus(dir / "dev.src", dir / "dev.tgt");
  s.test = read_corpus(dir / "test.src", dir / "test.tgt");
  s.train.split = Split::kTrain;
  s.dev.split = Split::kDev;
  s.test.split = Split::kTest;
  return s;
}

TrainResult train_from_splits(const CorpusSplits& splits, Direction direction, Side side, std::size_t min_freq,
                              const ModelConfig& sizes, const TrainConfig& options, Vocabulary& src_vocab,
                              Vocabulary& tgt_vocab) {
  const Vocabulary lang_src = Vocabulary::build(source_side(splits.train), min_freq);
  const Vocabulary lang_tgt = Vocabulary::build(target_side(splits.train), min_freq);
  const bool s2t = side == Side::kSourceToTarget;
  src_vocab = s2t ? lang_src : lang_tgt;
  tgt_vocab = s2t ? lang_tgt : lang_src;

  ModelConfig config = sizes;
  config.src_vocab = src_vocab.size();
  config.tgt_vocab = tgt_vocab.size();
  config.direction = direction;
  config.side = side;
  return train_model(config, encode_corpus(splits.train, lang_src, lang_tgt),
                     encode_corpus(splits.dev, lang_src, lang_tgt), options);
}

void save_trained(const TrainedModel& m, const TrainResult& result, const fs::path& ckpt) {
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(m.params, ckpt);
  m.src_vocab.save(ckpt.string() + ".src.vocab");
  m.tgt_vocab.save(ckpt.string() + ".tgt.vocab");
  std::ofstream log(ckpt.string() + ".log.csv");
  log << "epoch,train_loss,dev_perplexity,learning_rate\n" << std::setprecision(10);
  log << 0 << ",," << result.initial_dev_perplexity << ",\n";
  for (const auto& e : result.epochs)
    log << e.epoch << ',' << e.train_loss << ',' << e.dev_perplexity << ',' << e.learning_rate << '\n';
}

TrainedModel load_trained(const fs::path& ckpt) {
  TrainedModel m;
  m.params = load_checkpoint(ckpt);
  m.src_vocab = Vocabulary::load(ckpt.string() + ".src.vocab");
  m.tgt_vocab = Vocabulary::load(ckpt.string() + ".tgt.vocab");
  if (m.src_vocab.size() != m.params.config.src_vocab || m.tgt_vocab.size() != m.params.config.tgt_vocab) {
    throw std::runtime_error("vocabulary files next to " + ckpt.string() + " do not match the checkpoint");
  }
  return m;
}

// ---- experiment ---------------------------------------------------------------------------

namespace {

std::vector<TokenIds> encode_sources(const ParallelCorpus& c, const Vocabulary& v) {
  std::vector<TokenIds> out;
  for (const auto& p : c.pairs) out.push_back(v.encode(p.source));
  return out;
}

std::vector<Sentence> decode_targets(const std::vector<SentenceResult>& rs, const Vocabulary& v) {
  std::vector<Sentence> out;
  for (const auto& r : rs) out.push_back(v.decode(r.tokens));
  return out;
}

// Mean normalized cost per iteration; shorter traces repeat their last value.
PlotSeries mean_curve(const std::string& name, const std::vector<SentenceResult>& rs) {
  std::size_t steps = 0;
  for (const auto& r : rs) steps = std::max(steps, r.trace.size());
  PlotSeries s{name, {}, {}, true};
  for (std::size_t t = 0; t < steps; ++t) {
    double total = 0.0;
    for (const auto& r : rs) total += r.trace[std::min(t, r.trace.size() - 1)].cost / static_cast<double>(r.length);
    s.xs.push_back(static_cast<double>(t));
    s.ys.push_back(total / static_cast<double>(rs.size()));
  }
  return s;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void run_experiment(const ExperimentConfig& config, const fs::path& out, std::size_t jobs, std::ostream& log) {
  if (config.decoders.empty()) throw std::invalid_argument("experiment declares no decoders");
  fs::create_directories(out / "rows");
  fs::create_directories(out / "traces");
  fs::create_directories(out / "figures");

  const CorpusSplits splits = split_corpus(generate_synthetic(config.task), config.seed);
  write_splits(splits, out / "data");
  log << "data: " << splits.train.size() << " train, " << splits.dev.size() << " dev, " << splits.test.size()
      << " test pairs (" << task_name(config.task.kind) << ")\n";

  bool need_r2l = false, need_t2s = false;
  for (const auto& d : config.decoders) {
    need_r2l = need_r2l || d.direction == Direction::kRightToLeft || d.objective == ObjectiveKind::kBidirectional;
    need_t2s = need_t2s || d.objective == ObjectiveKind::kBilingual;
  }
  struct Job {
    std::string name;
    Direction direction;
    Side side;
  };
  std::vector<Job> kinds{{"l2r", Direction::kLeftToRight, Side::kSourceToTarget}};
  if (need_r2l) kinds.push_back({"r2l", Direction::kRightToLeft, Side::kSourceToTarget});
  if (need_t2s) kinds.push_back({"t2s", Direction::kLeftToRight, Side::kTargetToSource});

  std::vector<TrainedModel> trained(kinds.size());
  std::vector<std::string> notes(kinds.size());
  parallel_for(kinds.size(), jobs, [&](std::size_t k) {
    const fs::path ckpt = out / "models" / (kinds[k].name + ".ckpt");
    if (fs::exists(ckpt)) {
      trained[k] = load_trained(ckpt);
      notes[k] = "reused " + ckpt.string();
      return;
    }
    TrainResult r = train_from_splits(splits, kinds[k].direction, kinds[k].side, config.min_freq, config.model,
                                      config.train, trained[k].src_vocab, trained[k].tgt_vocab);
    trained[k].params = r.params;
    save_trained(trained[k], r, ckpt);
    std::ostringstream os;
    os << "trained, dev perplexity " << std::setprecision(4) << r.best_dev_perplexity << " at epoch " << r.best_epoch;
    notes[k] = os.str();
  });
  ModelSet models;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    log << "model " << kinds[k].name << ": " << notes[k] << '\n';
    if (kinds[k].name == "l2r") models.l2r = &trained[k].params;
    if (kinds[k].name == "r2l") models.r2l = &trained[k].params;
    if (kinds[k].name == "t2s") models.t2s = &trained[k].params;
  }
  const Vocabulary& src_vocab = trained[0].src_vocab;
  const Vocabulary& tgt_vocab = trained[0].tgt_vocab;

  const auto test_sources = encode_sources(splits.test, src_vocab);
  const auto dev_sources = encode_sources(splits.dev, src_vocab);
  const auto dev_refs = target_side(splits.dev);

  std::ofstream index(out / "rows" / "index.txt");
  std::ofstream tuning(out / "tuning.csv");
  tuning << "decoder,alpha,dev_bleu\n";
  Plot scatter{"Continuous vs discrete cost", "continuous cost", "discrete cost", {}, true, false};
  Plot curves{"Relaxed decoding", "iteration", "mean normalized cost", {}, false, false};
  std::ofstream scatter_csv(out / "cost_scatter.csv");
  scatter_csv << "decoder,sentence,continuous,discrete\n" << std::setprecision(17);

  for (const auto& base : config.decoders) {
    DecoderSpec d = base;
    if (!d.alpha_grid.empty()) {
      double best_bleu = -1.0;
      for (double a : d.alpha_grid) {
        DecoderSpec trial = d;
        trial.alpha = a;
        const double b = bleu(decode_targets(decode_all(trial, models, dev_sources, jobs), tgt_vocab), dev_refs);
        tuning << d.name << ',' << a << ',' << b << '\n';
        if (b > best_bleu) best_bleu = b, d.alpha = a;
      }
      log << d.name << ": alpha " << d.alpha << " (dev BLEU " << best_bleu << ")\n";
    }
    const auto results = decode_all(d, models, test_sources, jobs);

    std::ofstream hyp(out / "rows" / (d.name + ".hyp"));
    std::ofstream costs(out / "rows" / (d.name + ".costs.csv"));
    costs << "continuous,discrete\n" << std::setprecision(17);
    for (const auto& r : results) {
      hyp << join(tgt_vocab.decode(r.tokens)) << '\n';
      costs << r.continuous << ',' << r.discrete << '\n';
    }
    if (!results.front().nbest.empty()) {
      std::ofstream nb(out / "rows" / (d.name + ".nbest"));
      for (std::size_t i = 0; i < results.size(); ++i) write_nbest(nb, i, results[i].nbest, tgt_vocab);
    }
    if (d.relaxed()) {
      std::ofstream tr(out / "traces" / (d.name + ".csv"));
      write_trace_header(tr);
      for (std::size_t i = 0; i < results.size(); ++i) write_trace(tr, i, results[i].trace);
      PlotSeries pts{d.name, {}, {}, false};
      std::size_t fell_back = 0;
      for (std::size_t i = 0; i < results.size(); ++i) {
        pts.xs.push_back(results[i].continuous);
        pts.ys.push_back(results[i].discrete);
        scatter_csv << d.name << ',' << i << ',' << results[i].continuous << ',' << results[i].discrete << '\n';
        fell_back += results[i].fell_back;
      }
      std::vector<CostPoint> cp;
      for (std::size_t i = 0; i < pts.xs.size(); ++i) cp.push_back({pts.xs[i], pts.ys[i]});
      log << d.name << ": " << std::setprecision(3) << 100.0 * diagonal_fraction(cp) << "% on the cost diagonal, "
          << fell_back << " initializer fallbacks\n";
      scatter.series.push_back(std::move(pts));
      curves.series.push_back(mean_curve(d.name, results));
    }
    index << d.name << '\n';
    index.flush();
  }
  index.close();

  const auto reports = build_report(out);
  std::ofstream rep(out / "report.csv");
  write_report(rep, reports);
  write_report(log, reports);
  if (!scatter.series.empty()) {
    write_file(out / "figures" / "cost_scatter.svg", render_svg(scatter));
    write_file(out / "figures" / "decode_curves.svg", render_svg(curves));
  }

  if (config.convergence.enabled) {
    const auto& cs = config.convergence;
    const std::size_t n = std::min(cs.sentences, dev_sources.size());
    const std::vector<TokenIds> sources(dev_sources.begin(), dev_sources.begin() + static_cast<std::ptrdiff_t>(n));
    struct Variant {
      std::string name;
      Method method;
      double eta, momentum;
    };
    const std::vector<Variant> variants{{"eg+momentum", Method::kEG, cs.eg_eta, cs.momentum},
                                        {"eg", Method::kEG, cs.eg_eta, 0.0},
                                        {"sgd", Method::kSGD, cs.sgd_eta, 0.0}};
    Plot fig{"EG vs SGD, uniform init", "iteration", "mean normalized cost", {}, false, false};
    std::ofstream summary(out / "convergence.csv");
    summary << "method,eta,median_iterations_to_1pct,median_iterations,converged\n";
    for (const auto& v : variants) {
      DecoderSpec d;
      d.name = v.name;
      d.method = v.method;
      d.optim.init = InitKind::kUniform;
      d.optim.eta = v.eta;
      d.optim.momentum = v.momentum;
      d.optim.max_iter = cs.max_iter;
      const auto rs = decode_all(d, models, sources, jobs);
      std::vector<double> within, iters;
      std::size_t converged = 0;
      for (const auto& r : rs) {
        within.push_back(static_cast<double>(iterations_to_within(r.trace, 0.01)));
        iters.push_back(static_cast<double>(r.trace.size() - 1));
        converged += r.trace.size() - 1 < cs.max_iter;
      }
      summary << v.name << ',' << v.eta << ',' << median(within) << ',' << median(iters) << ',' << converged << '\n';
      log << "convergence " << v.name << ": median " << median(within) << " iterations to within 1%\n";
      fig.series.push_back(mean_curve(v.name, rs));
    }
    write_file(out / "figures" / "convergence.svg", render_svg(fig));
  }

  if (config.line_search.enabled) {
    const auto& ls = config.line_search;
    const std::size_t n = std::min(ls.sentences, dev_sources.size());
    const auto etas = log_grid(ls.lo, ls.hi, ls.points);
    Plot fig{"Step size and initialization", "step size", "mean normalized cost", {}, false, true};
    std::ofstream csv(out / "line_search.csv");
    csv << "init,eta,mean_cost\n" << std::setprecision(10);
    for (InitKind init : ls.inits) {
      std::vector<ObjectiveSpec> specs;
      for (std::size_t i = 0; i < n; ++i) {
        ObjectiveSpec o;
        o.primary = models.l2r;
        o.source = dev_sources[i];
        specs.push_back(std::move(o));
      }
      OptimConfig oc;
      oc.init = init;
      oc.momentum = ls.momentum;
      oc.max_iter = ls.max_iter;
      const auto points = line_search(specs, oc, etas, jobs);
      PlotSeries s{init_name(init), {}, {}, true};
      for (const auto& p : points) {
        csv << init_name(init) << ',' << p.eta << ',' << p.mean_cost << '\n';
        s.xs.push_back(p.eta);
        s.ys.push_back(p.mean_cost);
      }
      log << "line search " << init_name(init) << ": best eta " << best_eta(points) << '\n';
      fig.series.push_back(std::move(s));
    }
    write_file(out / "figures" / "step_size.svg", render_svg(fig));
  }
}

std::vector<EvalReport> build_report(const fs::path& dir) {
  const ParallelCorpus test = read_corpus(dir / "data" / "test.src", dir / "data" / "test.tgt");
  const auto refs = target_side(test);
  std::ifstream index(dir / "rows" / "index.txt");
  if (!index) throw std::runtime_error("no experiment rows under " + dir.string());

  std::vector<EvalReport> out;
  std::string name;
  while (std::getline(index, name)) {
    if (name.empty()) continue;
    std::ifstream hyp(dir / "rows" / (name + ".hyp"));
    std::ifstream costs(dir / "rows" / (name + ".costs.csv"));
    if (!hyp || !costs) throw std::runtime_error("missing artifacts for row " + name);
    std::vector<Sentence> hyps;
    std::string line;
    while (std::getline(hyp, line)) hyps.push_back(tokenize(line));
    std::vector<double> cont, disc;
    std::getline(costs, line);
    while (std::getline(costs, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw std::runtime_error("malformed cost line in row " + name);
      cont.push_back(std::stod(line.substr(0, comma)));
      disc.push_back(std::stod(line.substr(comma + 1)));
    }
    if (cont.size() != hyps.size()) throw std::runtime_error("row " + name + " has mismatched hypotheses and costs");
    out.push_back(make_report(name, hyps, refs, std::move(cont), std::move(disc)));
  }
  return out;
}

void write_report(std::ostream& os, std::span<const EvalReport> rows) {
  write_report_header(os);
  for (const auto& r : rows) write_report_row(os, r);
}

}  // namespace reldec
