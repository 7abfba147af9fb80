#include <doctest.h>

#include <set>

#include "mnmt/common.hpp"
#include "mnmt/synthetic.hpp"
#include "mnmt/translator.hpp"

using namespace mnmt;

namespace {

struct Setup {
  synthetic::LowResourceData data;
  corpus::Vocabulary sv, tv;
  nmt::Model model;
  memory::GlobalMemory global;
  memory::MemoryAttention attention;

  static synthetic::LowResourceConfig small() {
    synthetic::LowResourceConfig c;
    c.train_pairs = 300;
    c.dev_pairs = 20;
    c.test_pairs = 30;
    c.vocab = 60;
    return c;
  }

  Setup()
      : data(synthetic::make_low_resource(small())),
        sv(corpus::build_vocab(data.train, corpus::Side::Source, 1000)),
        tv(corpus::build_vocab(data.train, corpus::Side::Target, 1000)),
        model(config(), 5),
        global(memory::build_global_memory(align::align_corpus(data.train, 5).dictionary, 2)),
        attention(memory::MemoryVariant::parse("sy_xy"), 16, 8, 8, 6, 0.5) {}

  nmt::ModelConfig config() const {
    nmt::ModelConfig c;
    c.source_vocab = sv.size();
    c.target_vocab = tv.size();
    c.embed_dim = 8;
    c.hidden_dim = 16;
    c.attention_dim = 8;
    c.readout_dim = 8;
    return c;
  }

  pipeline::Translator translator() const {
    pipeline::Translator t;
    t.model = &model;
    t.source_vocab = &sv;
    t.target_vocab = &tv;
    t.global = &global;
    t.attention = &attention;
    return t;
  }

  std::vector<corpus::Sentence> sources(const corpus::ParallelCorpus& c) const {
    std::vector<corpus::Sentence> out;
    for (const auto& p : c.pairs()) out.push_back(p.source);
    return out;
  }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("generators are deterministic and well formed") {
    const auto a = synthetic::make_cipher(50, 20, 9), b = synthetic::make_cipher(50, 20, 9);
    CHECK(a.gold == b.gold);
    std::set<std::string> targets;
    for (const auto& [s, t] : a.gold) targets.insert(t);
    CHECK(targets.size() == a.gold.size());
    for (const auto& p : a.corpus.pairs()) {
      REQUIRE(p.source.size() == p.target.size());
      for (std::size_t i = 0; i < p.source.size(); ++i) CHECK(a.gold.at(p.source[i]) == p.target[i]);
    }

    const auto copy = synthetic::make_copy(30, 20, 1);
    for (const auto& p : copy.pairs()) CHECK(p.source == p.target);

    synthetic::LowResourceConfig cfg;
    const auto lr = synthetic::make_low_resource(cfg);
    CHECK(lr.train.size() == 2000);
    CHECK(lr.lexicon.gold.size() == 300);
    CHECK(lr.lexicon.tail_words.size() == 15);
    for (const auto& p : lr.train.pairs()) CHECK(p.source.size() == p.target.size());
  }

  TEST_CASE("OOV suite construction") {
    const auto lr = synthetic::make_low_resource(Setup::small());
    const auto suite = synthetic::make_oov_suite(lr.lexicon, 20, 3);
    REQUIRE(suite.test.size() == 20);
    REQUIRE(suite.annotations.size() == 20);
    const auto sv = corpus::build_vocab(lr.train, corpus::Side::Source, 1000);
    const auto tv = corpus::build_vocab(lr.train, corpus::Side::Target, 1000);
    CHECK_NOTHROW(suite.table.validate(sv, tv));
    for (const auto& a : suite.annotations) {
      const auto& p = suite.test.pairs()[a.sentence];
      CHECK_FALSE(sv.contains(a.oov_source));
      CHECK(std::find(p.source.begin(), p.source.end(), a.oov_source) != p.source.end());
      CHECK(std::find(p.target.begin(), p.target.end(), a.gold_translation) != p.target.end());
      CHECK(tv.contains(a.gold_translation) == (a.subset == eval::OovSubset::TInv));
    }
  }

  TEST_CASE("beta zero reproduces the baseline and order is preserved") {
    const Setup s;
    const auto src = s.sources(s.data.test);
    pipeline::TranslateOptions base;
    base.mode = pipeline::Mode::Baseline;
    base.threads = 1;
    const auto baseline = pipeline::translate_all(s.translator(), src, base);

    pipeline::TranslateOptions zero;
    zero.mode = pipeline::Mode::Memory;
    zero.beta = 0.0;
    zero.threads = 3;
    CHECK(pipeline::translate_all(s.translator(), src, zero) == baseline);

    base.threads = 4;
    CHECK(pipeline::translate_all(s.translator(), src, base) == baseline);
    CHECK(pipeline::translate_sentence(s.translator(), {}, base).empty());
  }

  TEST_CASE("OOV translation changes no parameter and leaves no marked word") {
    const Setup s;
    const auto suite = synthetic::make_oov_suite(s.data.lexicon, 10, 4);
    pipeline::Translator t = s.translator();
    t.oov_table = &suite.table;
    const auto model_sum = s.model.params().checksum();
    const auto att_sum = s.attention.params().checksum();
    const auto global_size = s.global.size();
    pipeline::TranslateOptions opt;
    opt.beta = 0.9;
    const auto out = pipeline::translate_all(t, s.sources(suite.test), opt);
    CHECK(s.model.params().checksum() == model_sum);
    CHECK(s.attention.params().checksum() == att_sum);
    CHECK(s.global.size() == global_size);
    CHECK(out.size() == suite.test.size());
  }

  TEST_CASE("lexical mode needs a dictionary") {
    const Setup s;
    pipeline::TranslateOptions opt;
    opt.mode = pipeline::Mode::Lexical;
    CHECK_THROWS_AS(pipeline::translate_sentence(s.translator(), s.data.test.pairs()[0].source, opt), Error);
  }
}
