#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "mnmt/beam.hpp"
#include "mnmt/common.hpp"
#include "mnmt/synthetic.hpp"
#include "mnmt/train.hpp"

using namespace mnmt;
using namespace mnmt::nmt;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.source_vocab = 8;
  c.target_vocab = 9;
  c.embed_dim = 3;
  c.hidden_dim = 4;
  c.attention_dim = 3;
  c.readout_dim = 2;
  c.maxout_pool = 2;
  c.init_scale = 0.5;
  return c;
}

Tensor random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(num::Shape{n});
  for (double& v : t.values()) v = u(rng);
  return t;
}

const Tensor& P(const Model& m, std::size_t id) { return m.params()[id].value; }

std::vector<double> mv(const Tensor& w, std::span<const double> x) {
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) out[r] += w.at(r, c) * x[c];
  }
  return out;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// GRU written out element by element.
std::vector<double> manual_gru(const Model& m, const GruParams& g, std::span<const double> x, std::span<const double> h) {
  const auto wz = mv(P(m, g.wz), x), uz = mv(P(m, g.uz), h), wr = mv(P(m, g.wr), x), ur = mv(P(m, g.ur), h);
  std::vector<double> z(h.size()), r(h.size()), rh(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    z[i] = sigm(wz[i] + uz[i] + P(m, g.bz)[i]);
    r[i] = sigm(wr[i] + ur[i] + P(m, g.br)[i]);
    rh[i] = r[i] * h[i];
  }
  const auto wh = mv(P(m, g.wh), x), uh = mv(P(m, g.uh), rh);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double cand = std::tanh(wh[i] + uh[i] + P(m, g.bh)[i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
  }
  return out;
}

corpus::Ids greedy(const Model& m, std::span<const int> source) {
  const EncoderStates enc = encode(m, source);
  Tensor state = enc.initial_state;
  int prev = corpus::kBos;
  corpus::Ids out;
  for (std::size_t step = 0; step < 2 * source.size() + 5; ++step) {
    const Attention a = attend(m, state, enc);
    const DecoderOutput d = decode_step(m, prev, state, a.context);
    int best = -1;
    for (std::size_t w = 0; w < d.posterior.size(); ++w) {
      if (w == corpus::kPad || w == corpus::kBos) continue;
      if (best < 0 || d.posterior[w] > d.posterior[static_cast<std::size_t>(best)]) best = static_cast<int>(w);
    }
    if (best == corpus::kEos) break;
    out.push_back(best);
    prev = best;
    state = d.state;
  }
  return out;
}

}  // namespace

TEST_SUITE("nmt") {
  TEST_CASE("GRU cell matches the element-wise formula and finite differences") {
    Model m(tiny_config(), 3);
    std::mt19937_64 rng(4);
    const Tensor x = random_vector(3, rng), h = random_vector(4, rng);
    Tape t(false);
    const Var out = gru_step(t, m, m.enc_fwd, t.constant_ref(x), t.constant_ref(h));
    const auto ref = manual_gru(m, m.enc_fwd, x.values(), h.values());
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(out.value()[i] - ref[i]) < 1e-12);

    const Tensor w = random_vector(4, rng);
    CHECK(testing::max_gradient_error(m.params(), [&](Tape& tp) {
            return num::dot(gru_step(tp, m, m.enc_fwd, tp.constant_ref(x), tp.constant_ref(h)), tp.constant_ref(w));
          }) < 1e-5);
  }

  TEST_CASE("encoder shapes, reversal and zero weights") {
    Model m(tiny_config(), 5);
    const std::vector<int> one{4};
    CHECK(encode(m, one).annotations.shape() == num::Shape{1, 8});
    CHECK_THROWS_AS(encode(m, std::vector<int>{}), Error);

    // With the forward GRU given the reverse GRU's weights, the forward pass over
    // the reversed input is the reverse sequence read backwards.
    Model mirrored(tiny_config(), 5);
    const auto f = mirrored.enc_fwd, r = mirrored.enc_rev;
    for (auto [a, b] : std::array<std::pair<std::size_t, std::size_t>, 9>{
             {{f.wz, r.wz}, {f.uz, r.uz}, {f.bz, r.bz}, {f.wr, r.wr}, {f.ur, r.ur}, {f.br, r.br}, {f.wh, r.wh},
              {f.uh, r.uh}, {f.bh, r.bh}}}) {
      mirrored.params()[a].value = mirrored.params()[b].value;
    }
    const std::vector<int> src{4, 5, 6, 7}, rev{7, 6, 5, 4};
    Tape t(false);
    const EncoderGraph a = encode_graph(t, mirrored, src);
    const EncoderGraph b = encode_graph(t, mirrored, rev);
    for (std::size_t j = 0; j < 4; ++j) CHECK(a.reverse_states[j].value() == b.forward_states[3 - j].value());

    Model zero(tiny_config(), 5);
    for (std::size_t p = 0; p < zero.params().size(); ++p) zero.params()[p].value.fill(0.0);
    const Tensor ann = encode(zero, src).annotations;
    for (double v : ann.values()) CHECK(v == 0.0);
  }

  TEST_CASE("attention special cases and direct formula") {
    Model m(tiny_config(), 6);
    std::mt19937_64 rng(8);
    const Tensor s = random_vector(4, rng);

    const EncoderStates single = encode(m, std::vector<int>{5});
    const Attention a1 = attend(m, s, single);
    CHECK(a1.alpha == Tensor::vector({1.0}));
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(a1.context[i] - single.annotations[i]) < 1e-15);

    EncoderStates same{Tensor(num::Shape{3, 8}), s};
    const Tensor h = random_vector(8, rng);
    for (std::size_t j = 0; j < 3; ++j) std::copy(h.values().begin(), h.values().end(), same.annotations.row(j).begin());
    const Attention uniform = attend(m, s, same);
    for (double v : uniform.alpha.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

    const EncoderStates enc = encode(m, std::vector<int>{4, 6, 5, 7, 4});
    const Attention att = attend(m, s, enc);
    std::vector<double> e(5);
    const auto ws = mv(P(m, m.att_w), s.values());
    for (std::size_t j = 0; j < 5; ++j) {
      const auto uh = mv(P(m, m.att_u), enc.annotations.row(j));
      for (std::size_t k = 0; k < ws.size(); ++k) e[j] += P(m, m.att_v)[k] * std::tanh(ws[k] + uh[k] + P(m, m.att_b)[k]);
    }
    double z = 0.0;
    for (double v : e) z += std::exp(v);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(att.alpha[j] - std::exp(e[j]) / z) < 1e-12);
  }

  TEST_CASE("attention MLP and maxout readout pass finite differences") {
    Model m(tiny_config(), 7);
    std::mt19937_64 rng(9);
    const Tensor s = random_vector(4, rng), y = random_vector(3, rng), c = random_vector(8, rng);
    const Tensor ann = encode(m, std::vector<int>{4, 5, 6}).annotations;
    const Tensor w = random_vector(8, rng);
    CHECK(testing::max_gradient_error(m.params(), [&](Tape& t) {
            EncoderGraph enc;
            enc.annotations = t.constant_ref(ann);
            enc.projected = num::matmul_nt(enc.annotations, t.param(m.params(), m.att_u));
            return num::dot(attend_graph(t, m, t.constant_ref(s), enc).context, t.constant_ref(w));
          }) < 1e-5);
    CHECK(testing::max_gradient_error(m.params(), [&](Tape& t) {
            return num::cross_entropy(readout_graph(t, m, t.constant_ref(y), t.constant_ref(s), t.constant_ref(c)), 5);
          }) < 1e-5);
  }

  TEST_CASE("decoder step equals the hand-composed formula and is a distribution") {
    Model m(tiny_config(), 10);
    std::mt19937_64 rng(11);
    const Tensor s = random_vector(4, rng), c = random_vector(8, rng);
    const DecoderOutput out = decode_step(m, 6, s, c);

    const auto y = P(m, m.tgt_embedding).row(6);
    std::vector<double> input(y.begin(), y.end());
    input.insert(input.end(), c.values().begin(), c.values().end());
    const auto state = manual_gru(m, m.dec, input, s.values());
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(out.state[i] - state[i]) < 1e-12);

    const auto ts = mv(P(m, m.out_s), s.values()), ty = mv(P(m, m.out_y), y), tc = mv(P(m, m.out_c), c.values());
    std::vector<double> zmax(2);
    for (std::size_t k = 0; k < 2; ++k) {
      double best = -1e300;
      for (std::size_t q = 0; q < 2; ++q) {
        const std::size_t i = k * 2 + q;
        best = std::max(best, ts[i] + ty[i] + tc[i] + P(m, m.out_b)[i]);
      }
      zmax[k] = best;
    }
    auto logits = mv(P(m, m.proj_w), zmax);
    for (std::size_t w = 0; w < logits.size(); ++w) logits[w] += P(m, m.proj_b)[w];
    const Tensor p = num::softmax_values(logits);
    double sum = 0.0;
    for (std::size_t w = 0; w < p.size(); ++w) {
      CHECK(std::abs(out.posterior[w] - p[w]) < 1e-12);
      sum += out.posterior[w];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    Model sharp = m;
    for (double& v : sharp.params()[sharp.proj_w].value.values()) v *= 2.0;
    for (double& v : sharp.params()[sharp.proj_b].value.values()) v *= 2.0;
    const DecoderOutput out2 = decode_step(sharp, 6, s, c);
    const auto argmax = [](const Tensor& t) {
      return std::max_element(t.values().begin(), t.values().end()) - t.values().begin();
    };
    CHECK(argmax(out.posterior) == argmax(out2.posterior));
    CHECK(*std::max_element(out2.posterior.values().begin(), out2.posterior.values().end()) >
          *std::max_element(out.posterior.values().begin(), out.posterior.values().end()));
  }

  TEST_CASE("full unrolled loss on a two-pair micro-batch passes finite differences") {
    Model m(tiny_config(), 12);
    CHECK(testing::max_gradient_error(m.params(), [&](Tape& t) {
            const std::array<Var, 2> losses{sentence_loss(t, m, std::vector<int>{4, 5, 6}, std::vector<int>{7, 8}),
                                            sentence_loss(t, m, std::vector<int>{7, 4}, std::vector<int>{5, 6, 4})};
            return num::add_n(losses);
          }) < 1e-5);
  }

  TEST_CASE("model survives a parameter round trip") {
    Model m(tiny_config(), 13);
    const Model back = Model::from_parameters(m.params());
    CHECK(back.config().hidden_dim == 4);
    CHECK(back.config().maxout_pool == 2);
    CHECK(back.params().checksum() == m.params().checksum());
    num::ParameterSet broken = m.params();
    broken[broken.index_of("dec.wz")].value = Tensor(num::Shape{4, 3});
    CHECK_THROWS_AS(Model::from_parameters(broken), Error);
  }

  TEST_CASE("one pair is memorised and training is deterministic") {
    const std::vector<EncodedPair> pair{{{4, 5, 6}, {7, 8}}};
    TrainConfig tc;
    tc.epochs = 150;
    tc.batch_size = 1;
    tc.seed = 3;
    tc.threads = 1;
    ModelConfig mc = tiny_config();
    mc.embed_dim = 8;
    mc.hidden_dim = 8;
    mc.init_scale = 0.1;
    const TrainResult r = train_nmt(pair, {}, mc, tc);
    CHECK(r.history.back().train_loss < 0.01);

    tc.epochs = 5;
    tc.threads = 2;
    std::vector<EncodedPair> several{{{4, 5}, {6}}, {{5, 6, 7}, {8, 4}}, {{7}, {5, 5}}};
    const TrainResult a = train_nmt(several, {}, mc, tc);
    tc.threads = 1;
    const TrainResult b = train_nmt(several, {}, mc, tc);
    for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.model.params().checksum() == b.model.params().checksum());
  }

  TEST_CASE("beam search: width one is greedy, wider beams score at least as well") {
    Model m(tiny_config(), 14);
    for (const std::vector<int>& src : {std::vector<int>{4, 5, 6}, std::vector<int>{7}, std::vector<int>{6, 6, 5, 4}}) {
      BeamConfig one{1, 0};
      const auto r1 = beam_search(m, src, one);
      CHECK(best_tokens(r1) == greedy(m, src));
      const auto r5 = beam_search(m, src, BeamConfig{5, 0});
      double best5 = -1e300;
      for (const auto& h : r5) best5 = std::max(best5, h.log_prob);
      CHECK(best5 >= r1.front().log_prob - 1e-12);
      for (const auto& h : r5) {
        for (int t : h.tokens) {
          CHECK(t != corpus::kPad);
          CHECK(t != corpus::kBos);
        }
        CHECK(h.tokens.size() <= 2 * src.size() + 5);
      }
    }
  }

  TEST_CASE("an identity hook leaves the search bitwise unchanged") {
    Model m(tiny_config(), 15);
    const std::vector<int> src{4, 7, 5};
    const auto plain = beam_search(m, src, BeamConfig{});
    const auto hooked = beam_search(m, src, BeamConfig{}, [](const StepContext&, std::span<double>) {});
    REQUIRE(plain.size() == hooked.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(plain[i].tokens == hooked[i].tokens);
      CHECK(plain[i].log_prob == hooked[i].log_prob);
    }
  }
}

namespace {

double greedy_token_accuracy(const Model& m, const std::vector<EncodedPair>& pairs) {
  std::size_t hit = 0, total = 0;
  for (const auto& p : pairs) {
    const corpus::Ids out = greedy(m, p.source);
    for (std::size_t i = 0; i < p.target.size(); ++i) hit += i < out.size() && out[i] == p.target[i];
    total += std::max(p.target.size(), out.size());
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

TEST_SUITE("nmt_slow") {
  TEST_CASE("copy task reaches 99% greedy token accuracy") {
    const corpus::ParallelCorpus train = synthetic::make_copy(1000, 20, 1);
    const corpus::ParallelCorpus test = synthetic::make_copy(100, 20, 2);
    const auto vocab = corpus::build_vocab(train, corpus::Side::Source, 100);
    ModelConfig mc;
    mc.source_vocab = mc.target_vocab = vocab.size();
    TrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = 20;
    tc.threads = 1;
    const TrainResult r = train_nmt(encode_corpus(train, vocab, vocab), {}, mc, tc);
    const double acc = greedy_token_accuracy(r.model, encode_corpus(test, vocab, vocab));
    MESSAGE("copy accuracy " << acc);
    CHECK(acc >= 0.99);
  }

  TEST_CASE("toy cipher task recovers exact targets") {
    const auto data = synthetic::make_cipher(650, 12, 4, 2, 5);
    corpus::ParallelCorpus train, held_out;
    for (std::size_t i = 0; i < data.corpus.size(); ++i) (i < 600 ? train : held_out).add(data.corpus.pairs()[i]);
    const auto sv = corpus::build_vocab(train, corpus::Side::Source, 100);
    const auto tv = corpus::build_vocab(train, corpus::Side::Target, 100);
    ModelConfig mc;
    mc.source_vocab = sv.size();
    mc.target_vocab = tv.size();
    TrainConfig tc;
    tc.epochs = 25;
    tc.batch_size = 20;
    tc.threads = 1;
    const TrainResult r = train_nmt(encode_corpus(train, sv, tv), {}, mc, tc);
    std::size_t exact = 0;
    for (const auto& p : held_out.pairs()) {
      const auto out = best_tokens(beam_search(r.model, corpus::encode(p.source, sv), BeamConfig{}));
      exact += corpus::decode(out, tv) == p.target;
    }
    MESSAGE("exact " << exact << "/50");
    CHECK(exact == 50);
  }
}
