#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mnmt/tape.hpp"

namespace mnmt::nmt {

struct ModelConfig {
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t embed_dim = 32;      // D
  std::size_t hidden_dim = 64;     // H; annotations are 2H
  std::size_t attention_dim = 64;  // width of the attention MLP
  std::size_t readout_dim = 32;    // maxout output size
  std::size_t maxout_pool = 2;
  double init_scale = 0.08;
};

// Parameter handles of one GRU:
//   z = sigmoid(Wz x + Uz h + bz)      r = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wh x + Uh (r * h) + bh)  h' = (1 - z) * h + z * h~
struct GruParams {
  std::size_t wz, uz, bz, wr, ur, br, wh, uh, bh;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  // Rebuilds a model from named parameters (checkpoint), inferring the config from shapes.
  static Model from_parameters(num::ParameterSet params);

  const ModelConfig& config() const noexcept { return config_; }
  num::ParameterSet& params() noexcept { return params_; }
  const num::ParameterSet& params() const noexcept { return params_; }

  std::size_t src_embedding, tgt_embedding;
  GruParams enc_fwd, enc_rev, dec;
  std::size_t init_w, init_b;                // s0 = tanh(init_w * h_1^rev + init_b)
  std::size_t att_w, att_u, att_b, att_v;    // e_j = v . tanh(W s + U h_j + b)
  std::size_t out_s, out_y, out_c, out_b;    // t = U_o s + V_o E y + C_o c + b_o, z = maxout(t)
  std::size_t proj_w, proj_b;                // logits = W z + b

 private:
  Model() = default;
  void bind_handles();

  ModelConfig config_;
  num::ParameterSet params_;
};

// ---- graph builders (shared by training and inference) -------------------------

num::Var gru_step(num::Tape& tape, const Model& model, const GruParams& gru, num::Var x, num::Var h);

struct EncoderGraph {
  num::Var annotations;  // [J x 2H]
  num::Var projected;    // [J x A], annotations * U_a^T
  num::Var initial_state;
  std::vector<num::Var> forward_states;
  std::vector<num::Var> reverse_states;
};

EncoderGraph encode_graph(num::Tape& tape, const Model& model, std::span<const int> source);

struct AttentionGraph {
  num::Var alpha;    // [J]
  num::Var context;  // [2H]
};

AttentionGraph attend_graph(num::Tape& tape, const Model& model, num::Var prev_state, const EncoderGraph& enc);

// z_i = g(y_{i-1}, s_{i-1}, c_i) followed by the projection; returns vocabulary logits.
num::Var readout_graph(num::Tape& tape, const Model& model, num::Var prev_embedding, num::Var prev_state,
                       num::Var context);

struct StepGraph {
  AttentionGraph attention;
  num::Var prev_embedding;
  num::Var state;   // s_i
  num::Var logits;  // for y_i
};

StepGraph step_graph(num::Tape& tape, const Model& model, int prev_token, num::Var prev_state,
                     const EncoderGraph& enc);

// Summed per-token cross-entropy of target + EOS under teacher forcing.
num::Var sentence_loss(num::Tape& tape, const Model& model, std::span<const int> source,
                       std::span<const int> target);

// ---- value-level operations ----------------------------------------------------

struct EncoderStates {
  num::Tensor annotations;    // [J x 2H]
  num::Tensor initial_state;  // s_0
};

EncoderStates encode(const Model& model, std::span<const int> source);

struct Attention {
  num::Tensor alpha;
  num::Tensor context;
};

Attention attend(const Model& model, const num::Tensor& prev_state, const EncoderStates& states);

struct DecoderOutput {
  num::Tensor state;      // s_i
  num::Tensor posterior;  // p(y_i) over the target vocabulary
};

DecoderOutput decode_step(const Model& model, int prev_token, const num::Tensor& prev_state,
                          const num::Tensor& context);

}  // namespace mnmt::nmt
