#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "reldec/autodiff.hpp"
#include "reldec/data.hpp"
#include "reldec/tensor.hpp"

namespace reldec {

// Order in which a model generates the target side.
enum class Direction : std::uint8_t { kLeftToRight = 0, kRightToLeft = 1 };
// Which language the model reads.
enum class Side : std::uint8_t { kSourceToTarget = 0, kTargetToSource = 1 };

std::string direction_name(Direction d);
std::string side_name(Side s);
Direction parse_direction(const std::string& s);
Side parse_side(const std::string& s);

struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 32;
  std::size_t attention = 16;
  Direction direction = Direction::kLeftToRight;
  Side side = Side::kSourceToTarget;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// All weights of one directional attentional encoder-decoder. "src"/"tgt" are
// the model's own input/output languages; for a target-to-source model the
// src embedding is over the target-language vocabulary.
struct ModelParams {
  ModelConfig config;

  Tensor src_embed;    // |V_S| x E
  Tensor tgt_embed;    // |V_T| x E
  Tensor enc_fwd_w;    // 4H x (E + H)
  Tensor enc_fwd_b;    // 4H
  Tensor enc_bwd_w;    // 4H x (E + H)
  Tensor enc_bwd_b;    // 4H
  Tensor init_w;       // 2H x H, maps the first backward state to both decoder layers
  Tensor init_b;       // 2H
  Tensor att_query;    // A x H
  Tensor att_key;      // A x 2H
  Tensor att_v;        // A
  Tensor dec1_w;       // 4H x (E + 2H + H)
  Tensor dec1_b;       // 4H
  Tensor dec2_w;       // 4H x (H + H)
  Tensor dec2_b;       // 4H
  Tensor mlp_w;        // H x (2H + E + H)
  Tensor mlp_b;        // H
  Tensor out_w;        // |V_T| x H
  Tensor out_b;        // |V_T|

  // Zero-initialized tensors of the right shapes.
  static ModelParams zeros(const ModelConfig& config);
  // Uniform(-scale, scale) for every entry.
  static ModelParams random(const ModelConfig& config, std::uint64_t seed, double scale = 0.08);

  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;
  void validate() const;

 private:
  template <class Self, class F>
  static void visit(Self& p, F& f) {
    f("src_embed", p.src_embed);
    f("tgt_embed", p.tgt_embed);
    f("enc_fwd_w", p.enc_fwd_w);
    f("enc_fwd_b", p.enc_fwd_b);
    f("enc_bwd_w", p.enc_bwd_w);
    f("enc_bwd_b", p.enc_bwd_b);
    f("init_w", p.init_w);
    f("init_b", p.init_b);
    f("att_query", p.att_query);
    f("att_key", p.att_key);
    f("att_v", p.att_v);
    f("dec1_w", p.dec1_w);
    f("dec1_b", p.dec1_b);
    f("dec2_w", p.dec2_w);
    f("dec2_b", p.dec2_b);
    f("mlp_w", p.mlp_w);
    f("mlp_b", p.mlp_b);
    f("out_w", p.out_w);
    f("out_b", p.out_b);
  }
};

// The parameters bound onto one tape, either as constants (decoding) or as
// differentiable leaves (training).
struct ModelGraph {
  const ModelParams* params = nullptr;
  ad::Var src_embed, tgt_embed;
  ad::Var enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b;
  ad::Var init_w, init_b;
  ad::Var att_query, att_key, att_v;
  ad::Var dec1_w, dec1_b, dec2_w, dec2_b;
  ad::Var mlp_w, mlp_b;
  ad::Var out_w, out_b;

  static ModelGraph bind(ad::Tape& tape, const ModelParams& params, bool trainable);
  ad::Tape& tape() const { return *src_embed.tape(); }
  const ModelConfig& config() const { return params->config; }
  // Leaves in ModelParams::for_each order.
  std::vector<ad::Var> leaves() const;
};

struct EncoderStates {
  std::vector<ad::Var> states;  // h_j = [forward_j ; backward_j], each 2H
  ad::Var matrix;               // |x| x 2H
  ad::Var keys;                 // |x| x A, att_key * h_j precomputed
  ad::Var first_backward;       // backward state at position 0

  std::size_t length() const { return states.size(); }
};

struct DecoderState {
  ad::Var h1, c1, h2, c2;  // h2 is g_i
};

struct DecoderStep {
  ad::Var attention;  // simplex over source positions
  ad::Var context;
  DecoderState state;
  ad::Var logits;     // |V_T|
};

EncoderStates encode(const ModelGraph& g, std::span<const int> source);
// `rows` is |x| x |V_S|, each row a distribution; uses expected embeddings.
EncoderStates encode_relaxed(const ModelGraph& g, ad::Var rows);

DecoderState initial_state(const ModelGraph& g, const EncoderStates& enc);
DecoderStep decoder_step(const ModelGraph& g, ad::Var prev_embedding, const DecoderState& prev,
                         const EncoderStates& enc);

ad::Var target_embedding(const ModelGraph& g, int token);

// sum_i log P(y_i | y_<i, x), teacher-forced.
ad::Var target_log_prob(const ModelGraph& g, const EncoderStates& enc, std::span<const int> target);
// sum_i rows_i . log_softmax(f(rows_<i, x)), feeding expected embeddings.
ad::Var relaxed_target_log_prob(const ModelGraph& g, const EncoderStates& enc, ad::Var rows);

// Convenience wrappers that build and discard a tape.
double sequence_log_prob(const ModelParams& params, std::span<const int> source, std::span<const int> target);
// Rows of `relaxed` must lie on the simplex (tolerance 1e-9).
double relaxed_log_prob(const ModelParams& params, std::span<const int> source, const Tensor& relaxed);

// Throws std::invalid_argument if a row has a negative entry or does not sum
// to one within `tol`.
void check_simplex_rows(const Tensor& rows, double tol = 1e-9);

Tensor one_hot_rows(std::span<const int> tokens, std::size_t vocab);

// Reverses positions [0, n-1) and keeps the last position in place. The last
// position is the end-of-sentence slot in every target sequence.
TokenIds reverse_keep_last(std::span<const int> tokens);
std::vector<std::size_t> reverse_keep_last_order(std::size_t n);

// ---- checkpoints --------------------------------------------------------------

// "S2SCKPT", u32 version, config block, then (name, shape, f64 values)
// entries. Little-endian throughout.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const ModelParams& params, std::ostream& os);
ModelParams read_checkpoint(std::istream& is);

}  // namespace reldec
