#include "reldec/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "reldec/experiment.hpp"

namespace reldec {

namespace fs = std::filesystem;

namespace {

struct GenerateArgs {
  std::string task;
  std::size_t pairs = 2000, vocab = 20, min_length = 3, max_length = 10, swaps = 1;
  double noise_rate = 0.1;
  bool identity = false;
  std::uint64_t seed = 1;
  std::string out;
};

struct TrainArgs {
  std::string data, out, direction = "l2r", side = "s2t";
  std::size_t epochs = 30, batch = 1, patience = 3, embed = 32, hidden = 32, attention = 16, min_freq = 1;
  double lr = 0.3, clip = 5.0;
  std::uint64_t seed = 1;
};

struct DecodeArgs {
  std::string l2r, r2l, t2s, input, data, split = "test", out;
  std::string method = "greedy", direction = "l2r", objective = "single", init = "greedy";
  double alpha = 0.5, eta = 50.0, momentum = 0.9, anneal = 1.0;
  std::size_t width = 5, nbest = 1, max_iter = 100, jobs = 1;
  std::uint64_t seed = 1;
};

struct ExperimentArgs {
  std::string config, out;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
};

struct ReportArgs {
  std::string dir, out;
};

struct LineSearchArgs {
  std::string model, data, split = "dev", init = "uniform", algorithm = "eg", out;
  std::size_t sentences = 20, points = 8, max_iter = 100, jobs = 1;
  double lo = 10.0, hi = 400.0, momentum = 0.9;
  std::uint64_t seed = 1;
};

const ParallelCorpus& pick_split(const CorpusSplits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "dev") return s.dev;
  if (name == "test") return s.test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, dev or test)");
}

void open_out(std::ofstream& os, const fs::path& path) {
  os.open(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  TaskSpec spec;
  spec.kind = parse_task(a.task);
  spec.pairs = a.pairs;
  spec.vocab_size = a.vocab;
  spec.seed = a.seed;
  spec.min_length = a.min_length;
  spec.max_length = a.max_length;
  spec.swaps_per_sentence = a.swaps;
  spec.noise_rate = a.noise_rate;
  spec.identity_permutation = a.identity;
  const CorpusSplits splits = split_corpus(generate_synthetic(spec), a.seed);
  write_splits(splits, a.out);
  out << "wrote " << splits.train.size() << "/" << splits.dev.size() << "/" << splits.test.size()
      << " train/dev/test pairs to " << a.out << '\n';
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const CorpusSplits splits = read_splits(a.data);
  ModelConfig sizes;
  sizes.embed = a.embed;
  sizes.hidden = a.hidden;
  sizes.attention = a.attention;
  TrainConfig tc;
  tc.max_epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch;
  tc.clip_norm = a.clip;
  tc.patience = a.patience;
  tc.seed = a.seed;
  tc.on_epoch = [&](std::size_t epoch, double loss, double ppl) {
    out << "epoch " << epoch << "  train loss " << std::setprecision(5) << loss << "  dev perplexity " << ppl << '\n';
  };
  TrainedModel m;
  TrainResult r = train_from_splits(splits, parse_direction(a.direction), parse_side(a.side), a.min_freq, sizes, tc,
                                    m.src_vocab, m.tgt_vocab);
  m.params = r.params;
  save_trained(m, r, a.out);
  out << "best dev perplexity " << r.best_dev_perplexity << " (epoch " << r.best_epoch << "), saved " << a.out << '\n';
  return 0;
}

int cmd_decode(const DecodeArgs& a, std::ostream& out) {
  DecoderSpec d;
  d.name = "decode";
  d.method = parse_method(a.method);
  d.direction = parse_direction(a.direction);
  d.objective = parse_objective(a.objective);
  d.alpha = a.alpha;
  d.width = a.width;
  d.nbest = a.nbest;
  d.optim.init = parse_init(a.init);
  d.optim.beam_width = a.width;
  d.optim.eta = a.eta;
  d.optim.momentum = a.momentum;
  d.optim.max_iter = a.max_iter;
  d.optim.anneal = a.anneal;
  d.optim.algorithm = d.method == Method::kSGD ? Algorithm::kSGD : Algorithm::kEG;
  d.validate();

  std::optional<TrainedModel> l2r, r2l, t2s;
  if (!a.l2r.empty()) l2r = load_trained(a.l2r);
  if (!a.r2l.empty()) r2l = load_trained(a.r2l);
  if (!a.t2s.empty()) t2s = load_trained(a.t2s);
  ModelSet models{l2r ? &l2r->params : nullptr, r2l ? &r2l->params : nullptr, t2s ? &t2s->params : nullptr};
  const bool lead_l2r = d.direction == Direction::kLeftToRight;
  const std::optional<TrainedModel>& lead = lead_l2r ? l2r : r2l;
  if (!lead) throw std::invalid_argument(std::string("decoding needs --") + (lead_l2r ? "l2r" : "r2l") + " checkpoint");
  if (d.objective == ObjectiveKind::kBidirectional && !(l2r && r2l)) {
    throw std::invalid_argument("bidirectional objective needs both --l2r and --r2l checkpoints");
  }
  if (d.objective == ObjectiveKind::kBilingual && !t2s) {
    throw std::invalid_argument("bilingual objective needs a --t2s checkpoint");
  }
  const Vocabulary& src_vocab = lead->src_vocab;
  const Vocabulary& tgt_vocab = lead->tgt_vocab;

  std::vector<Sentence> sources, refs;
  if (!a.data.empty()) {
    const ParallelCorpus c = pick_split(read_splits(a.data), a.split);
    sources = source_side(c);
    refs = target_side(c);
  } else {
    std::ifstream is(a.input);
    if (!is) throw std::runtime_error("cannot read input " + a.input);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      sources.push_back(tokenize(line));
      if (sources.back().empty()) throw std::runtime_error(a.input + ":" + std::to_string(lineno) + ": empty sentence");
    }
  }
  std::vector<TokenIds> encoded;
  for (const auto& s : sources) encoded.push_back(src_vocab.encode(s));

  const auto results = decode_all(d, models, encoded, a.jobs);
  fs::create_directories(a.out);
  std::ofstream hyp, costs;
  open_out(hyp, fs::path(a.out) / "hyp.txt");
  open_out(costs, fs::path(a.out) / "costs.csv");
  costs << "continuous,discrete\n" << std::setprecision(17);
  std::vector<Sentence> hyps;
  for (const auto& r : results) {
    hyps.push_back(tgt_vocab.decode(r.tokens));
    hyp << join(hyps.back()) << '\n';
    costs << r.continuous << ',' << r.discrete << '\n';
  }
  if (d.method == Method::kBeam || d.method == Method::kRerank) {
    std::ofstream nb;
    open_out(nb, fs::path(a.out) / "nbest.txt");
    for (std::size_t i = 0; i < results.size(); ++i) write_nbest(nb, i, results[i].nbest, tgt_vocab);
  }
  if (d.relaxed()) {
    std::ofstream tr;
    open_out(tr, fs::path(a.out) / "trace.csv");
    write_trace_header(tr);
    for (std::size_t i = 0; i < results.size(); ++i) write_trace(tr, i, results[i].trace);
  }
  out << "decoded " << results.size() << " sentences with " << a.method << " into " << a.out << '\n';
  if (!refs.empty()) out << "BLEU " << std::fixed << std::setprecision(2) << bleu(hyps, refs) << '\n';
  return 0;
}

int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
  ExperimentConfig c = load_experiment_config(a.config);
  if (a.seed) {
    c.seed = *a.seed;
    c.task.seed = *a.seed;
    c.train.seed = *a.seed;
  }
  run_experiment(c, a.out, a.jobs, out);
  return 0;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto rows = build_report(a.dir);
  if (a.out.empty()) {
    write_report(out, rows);
  } else {
    std::ofstream os;
    open_out(os, a.out);
    write_report(os, rows);
  }
  return 0;
}

int cmd_line_search(const LineSearchArgs& a, std::ostream& out) {
  const TrainedModel m = load_trained(a.model);
  const ParallelCorpus c = pick_split(read_splits(a.data), a.split);
  std::vector<ObjectiveSpec> specs;
  for (std::size_t i = 0; i < std::min(a.sentences, c.size()); ++i) {
    ObjectiveSpec o;
    o.primary = &m.params;
    o.source = m.src_vocab.encode(c.pairs[i].source);
    specs.push_back(std::move(o));
  }
  OptimConfig oc;
  oc.algorithm = parse_algorithm(a.algorithm);
  oc.init = parse_init(a.init);
  oc.momentum = a.momentum;
  oc.max_iter = a.max_iter;
  const auto etas = log_grid(a.lo, a.hi, a.points);
  const auto points = line_search(specs, oc, etas, a.jobs);

  std::ofstream file;
  if (!a.out.empty()) open_out(file, a.out);
  std::ostream& os = a.out.empty() ? out : file;
  os << "eta,mean_cost\n" << std::setprecision(10);
  for (const auto& p : points) os << p.eta << ',' << p.mean_cost << '\n';
  out << "best eta " << best_eta(points) << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relaxed continuous-optimization decoding for attentional translation models"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a seeded synthetic corpus as train/dev/test splits");
  g->add_option("--task", gen.task, "copy, reverse, cipher or noisy-cipher")->required();
  g->add_option("--pairs", gen.pairs, "Sentence pairs before splitting")->capture_default_str();
  g->add_option("--vocab", gen.vocab, "Content word types")->capture_default_str();
  g->add_option("--min-length", gen.min_length)->capture_default_str();
  g->add_option("--max-length", gen.max_length)->capture_default_str();
  g->add_option("--swaps", gen.swaps, "Adjacent swaps per cipher sentence")->capture_default_str();
  g->add_option("--noise-rate", gen.noise_rate, "Noisy-cipher replacement rate")->capture_default_str();
  g->add_flag("--identity", gen.identity, "Use the identity cipher permutation");
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one attentional encoder-decoder");
  t->add_option("--data", tr.data, "Directory written by generate")->required();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--direction", tr.direction, "l2r or r2l")->capture_default_str();
  t->add_option("--side", tr.side, "s2t or t2s")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--clip", tr.clip)->capture_default_str();
  t->add_option("--patience", tr.patience)->capture_default_str();
  t->add_option("--embed", tr.embed)->capture_default_str();
  t->add_option("--hidden", tr.hidden)->capture_default_str();
  t->add_option("--attention", tr.attention)->capture_default_str();
  t->add_option("--min-freq", tr.min_freq)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();

  DecodeArgs de;
  auto* d = app.add_subcommand("decode", "Decode sentences with a baseline or relaxed decoder");
  d->add_option("--l2r", de.l2r, "Left-to-right checkpoint");
  d->add_option("--r2l", de.r2l, "Right-to-left checkpoint");
  d->add_option("--t2s", de.t2s, "Target-to-source checkpoint");
  auto* in_opt = d->add_option("--input", de.input, "Source sentences, one per line");
  auto* data_opt = d->add_option("--data", de.data, "Corpus directory; decodes --split and reports BLEU");
  in_opt->excludes(data_opt);
  d->add_option("--split", de.split)->capture_default_str();
  d->add_option("--out", de.out, "Output directory")->required();
  d->add_option("--method", de.method, "greedy, beam, rerank, eg or sgd")->capture_default_str();
  d->add_option("--direction", de.direction, "Leading model, l2r or r2l")->capture_default_str();
  d->add_option("--objective", de.objective, "single, bidirectional or bilingual")->capture_default_str();
  d->add_option("--alpha", de.alpha)->capture_default_str();
  d->add_option("--width", de.width)->capture_default_str();
  d->add_option("--nbest", de.nbest)->capture_default_str();
  d->add_option("--init", de.init, "uniform, greedy, beam or rerank")->capture_default_str();
  d->add_option("--eta", de.eta)->capture_default_str();
  d->add_option("--momentum", de.momentum)->capture_default_str();
  d->add_option("--max-iter", de.max_iter)->capture_default_str();
  d->add_option("--anneal", de.anneal, "Per-iteration step size factor")->capture_default_str();
  d->add_option("--jobs", de.jobs)->capture_default_str();
  d->add_option("--seed", de.seed)->capture_default_str();

  ExperimentArgs ex;
  auto* e = app.add_subcommand("experiment", "Run every decoder of a config file and write tables and figures");
  e->add_option("--config", ex.config, "INI experiment file")->required();
  e->add_option("--out", ex.out, "Output directory")->required();
  e->add_option("--jobs", ex.jobs)->capture_default_str();
  e->add_option("--seed", ex.seed, "Overrides the config seed");

  ReportArgs re;
  auto* r = app.add_subcommand("report", "Rebuild the results table from a finished experiment");
  r->add_option("--dir", re.dir, "Experiment output directory")->required();
  r->add_option("--out", re.out, "Write the table here instead of stdout");

  LineSearchArgs ls;
  auto* l = app.add_subcommand("line-search", "Scan relaxed-decoding step sizes on a log grid");
  l->add_option("--model", ls.model, "Source-to-target checkpoint")->required();
  l->add_option("--data", ls.data, "Corpus directory")->required();
  l->add_option("--split", ls.split)->capture_default_str();
  l->add_option("--sentences", ls.sentences)->capture_default_str();
  l->add_option("--lo", ls.lo)->capture_default_str();
  l->add_option("--hi", ls.hi)->capture_default_str();
  l->add_option("--points", ls.points)->capture_default_str();
  l->add_option("--init", ls.init)->capture_default_str();
  l->add_option("--algorithm", ls.algorithm, "eg or sgd")->capture_default_str();
  l->add_option("--momentum", ls.momentum)->capture_default_str();
  l->add_option("--max-iter", ls.max_iter)->capture_default_str();
  l->add_option("--jobs", ls.jobs)->capture_default_str();
  l->add_option("--seed", ls.seed)->capture_default_str();
  l->add_option("--out", ls.out, "CSV output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex_) {
    return app.exit(ex_, out, err);
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*d) {
      if (de.input.empty() && de.data.empty()) throw std::invalid_argument("decode needs --input or --data");
      return cmd_decode(de, out);
    }
    if (*e) return cmd_experiment(ex, out);
    if (*r) return cmd_report(re, out);
    if (*l) return cmd_line_search(ls, out);
  } catch (const std::exception& ex_) {
    err << "error: " << ex_.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace reldec
