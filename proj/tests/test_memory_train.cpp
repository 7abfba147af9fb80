#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mnmt/common.hpp"
#include "mnmt/memory_train.hpp"

using namespace mnmt;
using namespace mnmt::memory;

namespace {

struct Fixture {
  corpus::Vocabulary sv, tv;
  nmt::Model model;

  Fixture() : model(make_config(), 21) {}

  static corpus::Vocabulary source_vocab() {
    corpus::Vocabulary v;
    for (const char* w : {"a", "b", "c", "d"}) v.add(w);
    return v;
  }
  static corpus::Vocabulary target_vocab() {
    corpus::Vocabulary v;
    for (const char* w : {"x", "y", "z", "w"}) v.add(w);
    return v;
  }
  nmt::ModelConfig make_config() {
    sv = source_vocab();
    tv = target_vocab();
    nmt::ModelConfig c;
    c.source_vocab = sv.size();
    c.target_vocab = tv.size();
    c.embed_dim = 4;
    c.hidden_dim = 3;
    c.attention_dim = 4;
    c.readout_dim = 2;
    c.init_scale = 0.5;
    return c;
  }
};

corpus::SentencePair pair(const char* s, const char* t) { return {corpus::tokenize(s), corpus::tokenize(t)}; }

}  // namespace

TEST_SUITE("memory_train") {
  TEST_CASE("skip rule: UNK and absent references carry no gold index") {
    Fixture f;
    const GlobalMemory global({{"a", "x", 1.0, 1.0}, {"b", "y", 1.0, 1.0}});
    const MemoryExample ex = prepare_example(f.model, pair("a b", "x q y z"), f.sv, f.tv, global);
    REQUIRE(ex.gold.size() == 4);
    CHECK(ex.gold[0].has_value());
    CHECK_FALSE(ex.gold[1].has_value());  // UNK
    CHECK(ex.gold[2].has_value());
    CHECK_FALSE(ex.gold[3].has_value());  // not in memory
    CHECK(ex.trainable_steps() == 2);
    CHECK(ex.prev_tokens[0] == corpus::kBos);
    CHECK(ex.prev_tokens[1] == f.tv.id("x"));
  }

  TEST_CASE("an all-skip corpus leaves the parameters bitwise unchanged") {
    Fixture f;
    const GlobalMemory global({{"a", "w", 1.0, 1.0}});
    corpus::ParallelCorpus c;
    c.add(pair("a b", "x y"));
    c.add(pair("c a", "z"));
    const auto examples = prepare_examples(f.model, c, f.sv, f.tv, global, 1);
    MemoryTrainConfig cfg;
    cfg.threads = 1;
    MemoryTrainer trainer(f.model, MemoryAttention(MemoryVariant::parse("sy_xy"), 3, 4, 4, 1), cfg);
    const auto before = trainer.attention().params().checksum();
    const auto report = trainer.run_epoch(examples, examples);
    CHECK(report.trained_steps == 0);
    CHECK(report.skipped_steps == 3);
    CHECK(trainer.attention().params().checksum() == before);
    CHECK_THROWS_AS(train_memory_attention(c, c, f.model, f.sv, f.tv, global, MemoryVariant::parse("sy_xy"), cfg), Error);
  }

  TEST_CASE("the memory loss gradient matches finite differences") {
    Fixture f;
    const GlobalMemory global({{"a", "x", 1.0, 0.7}, {"b", "y", 1.0, 1.0}, {"c", "x", 1.0, 0.3}, {"c", "z", 0.5, 1.0}});
    const auto e1 = prepare_example(f.model, pair("a b c", "x y z"), f.sv, f.tv, global);
    const auto e2 = prepare_example(f.model, pair("c b", "y z"), f.sv, f.tv, global);
    for (const char* name : {"s_y", "sy_xy"}) {
      MemoryAttention att(MemoryVariant::parse(name), 3, 4, 4, 2, 0.5);
      CHECK(testing::max_gradient_error(att.params(), [&](num::Tape& t) {
              const auto l1 = memory_example_loss(t, att, f.model, e1);
              const auto l2 = memory_example_loss(t, att, f.model, e2);
              return num::add(l1->first, l2->first);
            }) < 1e-5);
    }
  }

  TEST_CASE("a single pair is learned to near-zero loss") {
    Fixture f;
    const GlobalMemory global({{"a", "x", 1.0, 1.0}, {"b", "z", 1.0, 1.0}});
    const std::vector<MemoryExample> ex{prepare_example(f.model, pair("a b", "x"), f.sv, f.tv, global)};
    REQUIRE(ex[0].local.size() == 2);
    MemoryTrainConfig cfg;
    cfg.batch_size = 1;
    cfg.threads = 1;
    MemoryTrainer trainer(f.model, MemoryAttention(MemoryVariant::parse("sy_xy"), 3, 4, 4, 3), cfg);
    const auto model_before = f.model.params().checksum();
    for (int e = 0; e < 400; ++e) trainer.run_epoch(ex, {});
    CHECK(memory_cross_entropy(trainer.attention(), f.model, ex, 1).per_step() < 0.01);
    CHECK(f.model.params().checksum() == model_before);

    const MemoryHook hook(f.model, trainer.attention(), ex[0].local, 0.5);
    const auto prev_emb = f.model.params()[f.model.tgt_embedding].value.row(corpus::kBos);
    const num::Tensor alpha =
        hook.attention_weights(ex[0].prev_states[0], num::Tensor::vector(std::vector<double>(prev_emb.begin(), prev_emb.end())));
    CHECK(alpha[*ex[0].gold[0]] > 0.99);
  }
}
