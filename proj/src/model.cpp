#include "mnmt/model.hpp"

#include <array>

#include "mnmt/common.hpp"
#include "mnmt/corpus.hpp"

namespace mnmt::nmt {

using num::Shape;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

void add_gru(num::ParameterSet& ps, const std::string& prefix, std::size_t input, std::size_t hidden, double scale,
             std::mt19937_64& rng) {
  for (const char* gate : {"z", "r", "h"}) {
    ps.add_uniform(prefix + ".w" + gate, Shape{hidden, input}, scale, rng);
    ps.add_uniform(prefix + ".u" + gate, Shape{hidden, hidden}, scale, rng);
    ps.add_uniform(prefix + ".b" + gate, Shape{hidden}, scale, rng);
  }
}

GruParams gru_handles(const num::ParameterSet& ps, const std::string& prefix) {
  return GruParams{ps.index_of(prefix + ".wz"), ps.index_of(prefix + ".uz"), ps.index_of(prefix + ".bz"),
                   ps.index_of(prefix + ".wr"), ps.index_of(prefix + ".ur"), ps.index_of(prefix + ".br"),
                   ps.index_of(prefix + ".wh"), ps.index_of(prefix + ".uh"), ps.index_of(prefix + ".bh")};
}

Var param(Tape& t, const Model& m, std::size_t id) { return t.param(m.params(), id); }

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.source_vocab <= corpus::kReservedCount || config.target_vocab <= corpus::kReservedCount) {
    throw Error(ErrorCode::InvalidArgument, "model vocabularies must hold more than the reserved symbols");
  }
  if (config.embed_dim == 0 || config.hidden_dim == 0 || config.attention_dim == 0 || config.readout_dim == 0 ||
      config.maxout_pool == 0) {
    throw Error(ErrorCode::InvalidArgument, "model dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  const double s = config.init_scale;
  const std::size_t D = config.embed_dim, H = config.hidden_dim, A = config.attention_dim;
  const std::size_t L = config.readout_dim, P = config.maxout_pool;
  auto& ps = params_;
  ps.add_uniform("src_emb", Shape{config.source_vocab, D}, s, rng);
  ps.add_uniform("tgt_emb", Shape{config.target_vocab, D}, s, rng);
  add_gru(ps, "enc_fwd", D, H, s, rng);
  add_gru(ps, "enc_rev", D, H, s, rng);
  add_gru(ps, "dec", D + 2 * H, H, s, rng);
  ps.add_uniform("init.w", Shape{H, H}, s, rng);
  ps.add_uniform("init.b", Shape{H}, s, rng);
  ps.add_uniform("att.w", Shape{A, H}, s, rng);
  ps.add_uniform("att.u", Shape{A, 2 * H}, s, rng);
  ps.add_uniform("att.b", Shape{A}, s, rng);
  ps.add_uniform("att.v", Shape{A}, s, rng);
  ps.add_uniform("out.s", Shape{P * L, H}, s, rng);
  ps.add_uniform("out.y", Shape{P * L, D}, s, rng);
  ps.add_uniform("out.c", Shape{P * L, 2 * H}, s, rng);
  ps.add_uniform("out.b", Shape{P * L}, s, rng);
  ps.add_uniform("proj.w", Shape{config.target_vocab, L}, s, rng);
  ps.add_uniform("proj.b", Shape{config.target_vocab}, s, rng);
  bind_handles();
}

void Model::bind_handles() {
  const auto& ps = params_;
  src_embedding = ps.index_of("src_emb");
  tgt_embedding = ps.index_of("tgt_emb");
  enc_fwd = gru_handles(ps, "enc_fwd");
  enc_rev = gru_handles(ps, "enc_rev");
  dec = gru_handles(ps, "dec");
  init_w = ps.index_of("init.w");
  init_b = ps.index_of("init.b");
  att_w = ps.index_of("att.w");
  att_u = ps.index_of("att.u");
  att_b = ps.index_of("att.b");
  att_v = ps.index_of("att.v");
  out_s = ps.index_of("out.s");
  out_y = ps.index_of("out.y");
  out_c = ps.index_of("out.c");
  out_b = ps.index_of("out.b");
  proj_w = ps.index_of("proj.w");
  proj_b = ps.index_of("proj.b");
}

Model Model::from_parameters(num::ParameterSet params) {
  Model m;
  m.params_ = std::move(params);
  m.bind_handles();
  const auto& ps = m.params_;
  ModelConfig c;
  c.source_vocab = ps[m.src_embedding].value.rows();
  c.target_vocab = ps[m.tgt_embedding].value.rows();
  c.embed_dim = ps[m.src_embedding].value.cols();
  c.hidden_dim = ps[m.enc_fwd.uz].value.rows();
  c.attention_dim = ps[m.att_v].value.size();
  c.readout_dim = ps[m.proj_w].value.cols();
  c.maxout_pool = ps[m.out_b].value.size() / c.readout_dim;
  m.config_ = c;
  const std::size_t D = c.embed_dim, H = c.hidden_dim;
  auto expect = [&](std::size_t id, Shape shape) {
    if (ps[id].value.shape() != shape) {
      throw Error(ErrorCode::Format, "parameter '" + ps[id].name + "' has shape " +
                                         num::shape_string(ps[id].value.shape()) + ", expected " +
                                         num::shape_string(shape));
    }
  };
  expect(m.tgt_embedding, {c.target_vocab, D});
  expect(m.dec.wz, {H, D + 2 * H});
  expect(m.att_u, {c.attention_dim, 2 * H});
  expect(m.out_c, {c.maxout_pool * c.readout_dim, 2 * H});
  expect(m.proj_b, {c.target_vocab});
  return m;
}

// ---- graph builders -------------------------------------------------------------------

Var gru_step(Tape& t, const Model& m, const GruParams& g, Var x, Var h) {
  const Var z = num::sigmoid(num::add_n(std::array<Var, 3>{
      num::matvec(param(t, m, g.wz), x), num::matvec(param(t, m, g.uz), h), param(t, m, g.bz)}));
  const Var r = num::sigmoid(num::add_n(std::array<Var, 3>{
      num::matvec(param(t, m, g.wr), x), num::matvec(param(t, m, g.ur), h), param(t, m, g.br)}));
  const Var cand = num::tanh(num::add_n(std::array<Var, 3>{
      num::matvec(param(t, m, g.wh), x), num::matvec(param(t, m, g.uh), num::mul(r, h)), param(t, m, g.bh)}));
  // (1 - z) * h + z * h~
  return num::add(num::mul(num::one_minus(z), h), num::mul(z, cand));
}

EncoderGraph encode_graph(Tape& t, const Model& m, std::span<const int> source) {
  if (source.empty()) throw Error(ErrorCode::EmptyInput, "cannot encode an empty source sentence");
  const std::size_t J = source.size(), H = m.config().hidden_dim;
  const Var emb = param(t, m, m.src_embedding);
  std::vector<Var> x(J);
  for (std::size_t j = 0; j < J; ++j) x[j] = num::row(emb, static_cast<std::size_t>(source[j]));

  EncoderGraph enc;
  enc.forward_states.resize(J);
  enc.reverse_states.resize(J);
  Var h = t.constant(Tensor(Shape{H}));
  for (std::size_t j = 0; j < J; ++j) h = enc.forward_states[j] = gru_step(t, m, m.enc_fwd, x[j], h);
  h = t.constant(Tensor(Shape{H}));
  for (std::size_t j = J; j-- > 0;) h = enc.reverse_states[j] = gru_step(t, m, m.enc_rev, x[j], h);

  std::vector<Var> rows(J);
  for (std::size_t j = 0; j < J; ++j) {
    rows[j] = num::concat(std::array<Var, 2>{enc.forward_states[j], enc.reverse_states[j]});
  }
  enc.annotations = num::stack_rows(rows);
  enc.projected = num::matmul_nt(enc.annotations, param(t, m, m.att_u));
  enc.initial_state =
      num::tanh(num::add(num::matvec(param(t, m, m.init_w), enc.reverse_states[0]), param(t, m, m.init_b)));
  return enc;
}

AttentionGraph attend_graph(Tape& t, const Model& m, Var prev_state, const EncoderGraph& enc) {
  const Var query = num::add(num::matvec(param(t, m, m.att_w), prev_state), param(t, m, m.att_b));
  const Var hidden = num::tanh(num::add_row_bias(enc.projected, query));
  const Var scores = num::matvec(hidden, param(t, m, m.att_v));
  AttentionGraph out;
  out.alpha = num::softmax(scores);
  out.context = num::matvec_t(enc.annotations, out.alpha);
  return out;
}

Var readout_graph(Tape& t, const Model& m, Var prev_embedding, Var prev_state, Var context) {
  const Var pre = num::add_n(std::array<Var, 4>{num::matvec(param(t, m, m.out_s), prev_state),
                                                num::matvec(param(t, m, m.out_y), prev_embedding),
                                                num::matvec(param(t, m, m.out_c), context), param(t, m, m.out_b)});
  const Var z = num::maxout(pre, m.config().maxout_pool);
  return num::add(num::matvec(param(t, m, m.proj_w), z), param(t, m, m.proj_b));
}

StepGraph step_graph(Tape& t, const Model& m, int prev_token, Var prev_state, const EncoderGraph& enc) {
  StepGraph s;
  s.attention = attend_graph(t, m, prev_state, enc);
  s.prev_embedding = num::row(param(t, m, m.tgt_embedding), static_cast<std::size_t>(prev_token));
  const Var input = num::concat(std::array<Var, 2>{s.prev_embedding, s.attention.context});
  s.state = gru_step(t, m, m.dec, input, prev_state);
  s.logits = readout_graph(t, m, s.prev_embedding, prev_state, s.attention.context);
  return s;
}

Var sentence_loss(Tape& t, const Model& m, std::span<const int> source, std::span<const int> target) {
  const EncoderGraph enc = encode_graph(t, m, source);
  std::vector<Var> losses;
  losses.reserve(target.size() + 1);
  Var state = enc.initial_state;
  int prev = corpus::kBos;
  for (std::size_t i = 0; i <= target.size(); ++i) {
    const int gold = i < target.size() ? target[i] : corpus::kEos;
    const StepGraph step = step_graph(t, m, prev, state, enc);
    losses.push_back(num::cross_entropy(step.logits, static_cast<std::size_t>(gold)));
    state = step.state;
    prev = gold;
  }
  return num::add_n(losses);
}

// ---- value-level operations ------------------------------------------------------------

EncoderStates encode(const Model& model, std::span<const int> source) {
  Tape t(false);
  const EncoderGraph enc = encode_graph(t, model, source);
  return EncoderStates{enc.annotations.value(), enc.initial_state.value()};
}

Attention attend(const Model& model, const Tensor& prev_state, const EncoderStates& states) {
  Tape t(false);
  EncoderGraph enc;
  enc.annotations = t.constant_ref(states.annotations);
  enc.projected = num::matmul_nt(enc.annotations, t.param(model.params(), model.att_u));
  const AttentionGraph a = attend_graph(t, model, t.constant_ref(prev_state), enc);
  return Attention{a.alpha.value(), a.context.value()};
}

DecoderOutput decode_step(const Model& model, int prev_token, const Tensor& prev_state, const Tensor& context) {
  Tape t(false);
  const Var s_prev = t.constant_ref(prev_state);
  const Var c = t.constant_ref(context);
  const Var y = num::row(t.param(model.params(), model.tgt_embedding), static_cast<std::size_t>(prev_token));
  const Var state = gru_step(t, model, model.dec, num::concat(std::array<Var, 2>{y, c}), s_prev);
  const Var logits = readout_graph(t, model, y, s_prev, c);
  return DecoderOutput{state.value(), num::softmax_values(logits.value().values())};
}

}  // namespace mnmt::nmt
