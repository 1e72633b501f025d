#include "reldec/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reldec {

using ad::Var;

std::string direction_name(Direction d) { return d == Direction::kLeftToRight ? "l2r" : "r2l"; }
std::string side_name(Side s) { return s == Side::kSourceToTarget ? "s2t" : "t2s"; }

Direction parse_direction(const std::string& s) {
  if (s == "l2r") return Direction::kLeftToRight;
  if (s == "r2l") return Direction::kRightToLeft;
  throw std::invalid_argument("unknown direction '" + s + "' (expected l2r or r2l)");
}

Side parse_side(const std::string& s) {
  if (s == "s2t") return Side::kSourceToTarget;
  if (s == "t2s") return Side::kTargetToSource;
  throw std::invalid_argument("unknown side '" + s + "' (expected s2t or t2s)");
}

void ModelConfig::validate() const {
  if (src_vocab <= kNumReserved || tgt_vocab <= kNumReserved) {
    throw std::invalid_argument("vocabularies must contain more than the reserved tokens");
  }
  if (embed == 0 || hidden == 0 || attention == 0) throw std::invalid_argument("model dimensions must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
  c.validate();
  const std::size_t E = c.embed, H = c.hidden, A = c.attention;
  ModelParams p;
  p.config = c;
  p.src_embed = Tensor({c.src_vocab, E});
  p.tgt_embed = Tensor({c.tgt_vocab, E});
  p.enc_fwd_w = Tensor({4 * H, E + H});
  p.enc_fwd_b = Tensor({4 * H});
  p.enc_bwd_w = Tensor({4 * H, E + H});
  p.enc_bwd_b = Tensor({4 * H});
  p.init_w = Tensor({2 * H, H});
  p.init_b = Tensor({2 * H});
  p.att_query = Tensor({A, H});
  p.att_key = Tensor({A, 2 * H});
  p.att_v = Tensor({A});
  p.dec1_w = Tensor({4 * H, E + 2 * H + H});
  p.dec1_b = Tensor({4 * H});
  p.dec2_w = Tensor({4 * H, 2 * H});
  p.dec2_b = Tensor({4 * H});
  p.mlp_w = Tensor({H, 2 * H + E + H});
  p.mlp_b = Tensor({H});
  p.out_w = Tensor({c.tgt_vocab, H});
  p.out_b = Tensor({c.tgt_vocab});
  return p;
}

ModelParams ModelParams::random(const ModelConfig& config, std::uint64_t seed, double scale) {
  ModelParams p = zeros(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  p.for_each([&](const char*, Tensor& t) {
    for (double& v : t.data()) v = dist(rng);
  });
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const char*, const Tensor& t) { n += t.size(); });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](const char*, const Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

void ModelParams::validate() const {
  const ModelParams ref = zeros(config);
  std::vector<std::vector<std::size_t>> shapes;
  ref.for_each([&](const char*, const Tensor& t) { shapes.push_back(t.shape()); });
  std::size_t k = 0;
  for_each([&](const char* name, const Tensor& t) {
    if (t.shape() != shapes[k]) {
      throw std::invalid_argument(std::string("parameter ") + name + " has shape " + t.shape_string() +
                                  ", expected " + shape_to_string(shapes[k]));
    }
    ++k;
  });
  if (!all_finite()) throw std::domain_error("model parameters contain non-finite values");
}

ModelGraph ModelGraph::bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  ModelGraph g;
  g.params = &params;
  auto b = [&](const Tensor& t) { return trainable ? tape.variable_ref(t) : tape.constant_ref(t); };
  g.src_embed = b(params.src_embed);
  g.tgt_embed = b(params.tgt_embed);
  g.enc_fwd_w = b(params.enc_fwd_w);
  g.enc_fwd_b = b(params.enc_fwd_b);
  g.enc_bwd_w = b(params.enc_bwd_w);
  g.enc_bwd_b = b(params.enc_bwd_b);
  g.init_w = b(params.init_w);
  g.init_b = b(params.init_b);
  g.att_query = b(params.att_query);
  g.att_key = b(params.att_key);
  g.att_v = b(params.att_v);
  g.dec1_w = b(params.dec1_w);
  g.dec1_b = b(params.dec1_b);
  g.dec2_w = b(params.dec2_w);
  g.dec2_b = b(params.dec2_b);
  g.mlp_w = b(params.mlp_w);
  g.mlp_b = b(params.mlp_b);
  g.out_w = b(params.out_w);
  g.out_b = b(params.out_b);
  return g;
}

std::vector<Var> ModelGraph::leaves() const {
  return {src_embed, tgt_embed, enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b, init_w, init_b, att_query, att_key,
          att_v,     dec1_w,    dec1_b,    dec2_w,    dec2_b,    mlp_w,     mlp_b,  out_w,  out_b};
}

namespace {

struct CellOut {
  Var h, c;
};

CellOut lstm_cell(Var w, Var b, Var input, Var h, Var c, std::size_t H) {
  Var gates = ad::affine(w, ad::concat({input, h}), b);
  Var in_gate = ad::sigmoid(ad::slice(gates, 0, H));
  Var forget_gate = ad::sigmoid(ad::slice(gates, H, H));
  Var out_gate = ad::sigmoid(ad::slice(gates, 2 * H, H));
  Var candidate = ad::tanh(ad::slice(gates, 3 * H, H));
  Var c_next = ad::add(ad::mul(forget_gate, c), ad::mul(in_gate, candidate));
  Var h_next = ad::mul(out_gate, ad::tanh(c_next));
  return {h_next, c_next};
}

EncoderStates run_encoder(const ModelGraph& g, const std::vector<Var>& embeddings) {
  const std::size_t n = embeddings.size();
  const std::size_t H = g.config().hidden;
  ad::Tape& tape = g.tape();
  const Var zero = tape.constant(Tensor({H}));

  std::vector<Var> fwd(n), bwd(n);
  CellOut s{zero, zero};
  for (std::size_t j = 0; j < n; ++j) {
    s = lstm_cell(g.enc_fwd_w, g.enc_fwd_b, embeddings[j], s.h, s.c, H);
    fwd[j] = s.h;
  }
  s = {zero, zero};
  for (std::size_t j = n; j-- > 0;) {
    s = lstm_cell(g.enc_bwd_w, g.enc_bwd_b, embeddings[j], s.h, s.c, H);
    bwd[j] = s.h;
  }

  EncoderStates enc;
  std::vector<Var> keys;
  for (std::size_t j = 0; j < n; ++j) {
    enc.states.push_back(ad::concat({fwd[j], bwd[j]}));
    keys.push_back(ad::matvec(g.att_key, enc.states.back()));
  }
  enc.matrix = ad::stack_rows(enc.states);
  enc.keys = ad::stack_rows(keys);
  enc.first_backward = bwd[0];
  return enc;
}

}  // namespace

EncoderStates encode(const ModelGraph& g, std::span<const int> source) {
  if (source.empty()) throw std::invalid_argument("encode: empty source sentence");
  std::vector<Var> emb;
  emb.reserve(source.size());
  for (int tok : source) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= g.config().src_vocab) {
      throw std::out_of_range("source token id " + std::to_string(tok) + " outside vocabulary of size " +
                              std::to_string(g.config().src_vocab));
    }
    emb.push_back(ad::row_select(g.src_embed, static_cast<std::size_t>(tok)));
  }
  return run_encoder(g, emb);
}

EncoderStates encode_relaxed(const ModelGraph& g, Var rows) {
  const Tensor& r = rows.value();
  if (r.rank() != 2 || r.cols() != g.config().src_vocab) {
    throw std::invalid_argument("encode_relaxed: rows of shape " + r.shape_string() +
                                " do not match source vocabulary " + std::to_string(g.config().src_vocab));
  }
  std::vector<Var> emb;
  for (std::size_t j = 0; j < r.rows(); ++j) emb.push_back(ad::weighted_row_sum(ad::row_select(rows, j), g.src_embed));
  return run_encoder(g, emb);
}

DecoderState initial_state(const ModelGraph& g, const EncoderStates& enc) {
  const std::size_t H = g.config().hidden;
  Var init = ad::tanh(ad::affine(g.init_w, enc.first_backward, g.init_b));
  const Var zero = g.tape().constant(Tensor({H}));
  return {ad::slice(init, 0, H), zero, ad::slice(init, H, H), zero};
}

DecoderStep decoder_step(const ModelGraph& g, Var prev_embedding, const DecoderState& prev, const EncoderStates& enc) {
  const ModelConfig& c = g.config();
  if (prev_embedding.value().rank() != 1 || prev_embedding.size() != c.embed) {
    throw std::invalid_argument("decoder_step: embedding of shape " + prev_embedding.value().shape_string() +
                                " does not match embedding size [" + std::to_string(c.embed) + "]");
  }
  const std::size_t H = c.hidden;
  DecoderStep step;
  // e_ij = v . tanh(W_q g_{i-1} + W_k h_j)
  Var query = ad::matvec(g.att_query, prev.h2);
  Var scores = ad::matvec(ad::tanh(ad::add_rowwise(enc.keys, query)), g.att_v);
  step.attention = ad::softmax(scores);
  step.context = ad::weighted_row_sum(step.attention, enc.matrix);

  CellOut l1 = lstm_cell(g.dec1_w, g.dec1_b, ad::concat({prev_embedding, step.context}), prev.h1, prev.c1, H);
  CellOut l2 = lstm_cell(g.dec2_w, g.dec2_b, l1.h, prev.h2, prev.c2, H);
  step.state = {l1.h, l1.c, l2.h, l2.c};

  Var hidden = ad::tanh(ad::affine(g.mlp_w, ad::concat({step.context, prev_embedding, l2.h}), g.mlp_b));
  step.logits = ad::affine(g.out_w, hidden, g.out_b);
  return step;
}

Var target_embedding(const ModelGraph& g, int token) {
  if (token < 0 || static_cast<std::size_t>(token) >= g.config().tgt_vocab) {
    throw std::out_of_range("target token id " + std::to_string(token) + " outside vocabulary of size " +
                            std::to_string(g.config().tgt_vocab));
  }
  return ad::row_select(g.tgt_embed, static_cast<std::size_t>(token));
}

Var target_log_prob(const ModelGraph& g, const EncoderStates& enc, std::span<const int> target) {
  if (target.empty()) throw std::invalid_argument("target_log_prob: empty target sequence");
  DecoderState state = initial_state(g, enc);
  Var prev = target_embedding(g, kBos);
  std::vector<Var> terms;
  terms.reserve(target.size());
  for (int tok : target) {
    Var next = target_embedding(g, tok);  // validates tok
    DecoderStep step = decoder_step(g, prev, state, enc);
    terms.push_back(ad::pick(ad::log_softmax(step.logits), static_cast<std::size_t>(tok)));
    state = step.state;
    prev = next;
  }
  return ad::add_n(terms);
}

Var relaxed_target_log_prob(const ModelGraph& g, const EncoderStates& enc, Var rows) {
  const Tensor& r = rows.value();
  if (r.rank() != 2 || r.cols() != g.config().tgt_vocab) {
    throw std::invalid_argument("relaxed rows of shape " + r.shape_string() + " do not match target vocabulary " +
                                std::to_string(g.config().tgt_vocab));
  }
  DecoderState state = initial_state(g, enc);
  Var prev = target_embedding(g, kBos);
  std::vector<Var> terms;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    Var row = ad::row_select(rows, i);
    DecoderStep step = decoder_step(g, prev, state, enc);
    terms.push_back(ad::dot(row, ad::log_softmax(step.logits)));
    state = step.state;
    prev = ad::weighted_row_sum(row, g.tgt_embed);
  }
  return ad::add_n(terms);
}

double sequence_log_prob(const ModelParams& params, std::span<const int> source, std::span<const int> target) {
  ad::Tape tape;
  ModelGraph g = ModelGraph::bind(tape, params, false);
  EncoderStates enc = encode(g, source);
  return target_log_prob(g, enc, target).value()[0];
}

double relaxed_log_prob(const ModelParams& params, std::span<const int> source, const Tensor& relaxed) {
  check_simplex_rows(relaxed);
  ad::Tape tape;
  ModelGraph g = ModelGraph::bind(tape, params, false);
  EncoderStates enc = encode(g, source);
  return relaxed_target_log_prob(g, enc, tape.constant_ref(relaxed)).value()[0];
}

void check_simplex_rows(const Tensor& rows, double tol) {
  if (rows.rank() != 2) throw std::invalid_argument("relaxed sequence must be a matrix, got " + rows.shape_string());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double total = 0.0;
    for (double v : rows.row(i)) {
      if (v < 0.0) throw std::invalid_argument("row " + std::to_string(i) + " has a negative entry");
      total += v;
    }
    if (std::abs(total - 1.0) > tol) {
      std::ostringstream os;
      os << "row " << i << " sums to " << total << ", not 1";
      throw std::invalid_argument(os.str());
    }
  }
}

Tensor one_hot_rows(std::span<const int> tokens, std::size_t vocab) {
  if (tokens.empty()) throw std::invalid_argument("one_hot_rows: empty token sequence");
  Tensor out({tokens.size(), vocab});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab) {
      throw std::out_of_range("token id " + std::to_string(tokens[i]) + " outside vocabulary of size " +
                              std::to_string(vocab));
    }
    out.at(i, static_cast<std::size_t>(tokens[i])) = 1.0;
  }
  return out;
}

std::vector<std::size_t> reverse_keep_last_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  if (n == 0) return order;
  for (std::size_t i = 0; i + 1 < n; ++i) order[i] = n - 2 - i;
  order[n - 1] = n - 1;
  return order;
}

TokenIds reverse_keep_last(std::span<const int> tokens) {
  TokenIds out;
  out.reserve(tokens.size());
  for (std::size_t k : reverse_keep_last_order(tokens.size())) out.push_back(tokens[k]);
  return out;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

constexpr char kMagic[] = "S2SCKPT";
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint8_t get_u8(std::istream& is) {
  const int c = is.get();
  if (c == EOF) throw std::runtime_error("checkpoint truncated");
  return static_cast<std::uint8_t>(c);
}

}  // namespace

void write_checkpoint(const ModelParams& params, std::ostream& os) {
  params.validate();
  os.write(kMagic, 7);
  put_u32(os, kFormatVersion);
  const ModelConfig& c = params.config;
  put_u64(os, c.src_vocab);
  put_u64(os, c.tgt_vocab);
  put_u64(os, c.embed);
  put_u64(os, c.hidden);
  put_u64(os, c.attention);
  put_u8(os, static_cast<std::uint8_t>(c.direction));
  put_u8(os, static_cast<std::uint8_t>(c.side));

  std::uint32_t count = 0;
  params.for_each([&](const char*, const Tensor&) { ++count; });
  put_u32(os, count);
  params.for_each([&](const char* name, const Tensor& t) {
    const std::string n(name);
    put_u32(os, static_cast<std::uint32_t>(n.size()));
    os.write(n.data(), static_cast<std::streamsize>(n.size()));
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_u64(os, e);
    for (double v : t.data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
  });
  if (!os) throw std::runtime_error("checkpoint write failed");
}

ModelParams read_checkpoint(std::istream& is) {
  char magic[7];
  if (!is.read(magic, 7) || std::string(magic, 7) != kMagic) throw std::runtime_error("not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.src_vocab = get_u64(is);
  c.tgt_vocab = get_u64(is);
  c.embed = get_u64(is);
  c.hidden = get_u64(is);
  c.attention = get_u64(is);
  const auto dir = get_u8(is);
  const auto side = get_u8(is);
  if (dir > 1 || side > 1) throw std::runtime_error("corrupt checkpoint config block");
  c.direction = static_cast<Direction>(dir);
  c.side = static_cast<Side>(side);

  ModelParams p = ModelParams::zeros(c);
  const std::uint32_t count = get_u32(is);
  std::uint32_t expected = 0;
  p.for_each([&](const char*, const Tensor&) { ++expected; });
  if (count != expected) throw std::runtime_error("checkpoint has " + std::to_string(count) + " entries, expected " +
                                                  std::to_string(expected));
  p.for_each([&](const char* name, Tensor& t) {
    const std::uint32_t len = get_u32(is);
    std::string n(len, '\0');
    if (!is.read(n.data(), len)) throw std::runtime_error("checkpoint truncated");
    if (n != name) throw std::runtime_error("checkpoint entry '" + n + "' where '" + name + "' was expected");
    const std::uint32_t rank = get_u32(is);
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = get_u64(is);
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint entry " + n + " has shape " + shape_to_string(shape) + ", expected " +
                               t.shape_string());
    }
    for (double& v : t.data()) v = std::bit_cast<double>(get_u64(is));
  });
  p.validate();
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(params, os);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace reldec
