#include "mnmt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mnmt/common.hpp"

namespace mnmt::synthetic {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {  // inclusive
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

// Pseudo-words from disjoint consonant sets per side so the two languages never share a token.
class WordMaker {
 public:
  WordMaker(std::string consonants, std::uint64_t seed) : consonants_(std::move(consonants)), rng_(seed) {}

  std::string make(std::set<std::string>& taken) {
    static const std::string vowels = "aeiou";
    for (;;) {
      const std::size_t syllables = uniform(rng_, 2, 3);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += consonants_[uniform(rng_, 0, consonants_.size() - 1)];
        w += vowels[uniform(rng_, 0, vowels.size() - 1)];
      }
      if (taken.insert(w).second) return w;
    }
  }

 private:
  std::string consonants_;
  Rng rng_;
};

const std::string kSourceConsonants = "ptkmnsh";
const std::string kTargetConsonants = "bdgrlvz";

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) {
    double total = 0.0;
    for (std::size_t r = 1; r <= n; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r), exponent);
      cdf_.push_back(total);
    }
    for (double& c : cdf_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct NounPhrase {
  std::string det, adj, noun;  // empty when absent
};

struct Clause {
  NounPhrase subject;
  std::string verb;
  NounPhrase object;
  std::string adverb;
};

class Grammar {
 public:
  Grammar(const Lexicon& lex, const LowResourceConfig& cfg) : lex_(&lex), tail_mass_(cfg.tail_mass) {
    for (const auto& [cls, words] : lex.head) samplers_.emplace(cls, ZipfSampler(words.size(), cfg.zipf_exponent));
  }

  std::string draw(WordClass cls, Rng& rng) const {
    const auto& tail = lex_->tail.at(cls);
    if (!tail.empty() && coin(rng, tail_mass_)) return tail[uniform(rng, 0, tail.size() - 1)];
    return lex_->head.at(cls)[samplers_.at(cls)(rng)];
  }

  NounPhrase noun_phrase(Rng& rng) const {
    NounPhrase np;
    if (coin(rng, 0.6)) np.det = draw(WordClass::Det, rng);
    if (coin(rng, 0.5)) np.adj = draw(WordClass::Adj, rng);
    np.noun = draw(WordClass::Noun, rng);
    return np;
  }

  Clause clause(Rng& rng) const {
    Clause c;
    c.subject = noun_phrase(rng);
    c.verb = draw(WordClass::Verb, rng);
    c.object = noun_phrase(rng);
    if (coin(rng, 0.3)) c.adverb = draw(WordClass::Adv, rng);
    return c;
  }

 private:
  const Lexicon* lex_;
  double tail_mass_;
  std::map<WordClass, ZipfSampler> samplers_;
};

void push(corpus::Sentence& s, const std::string& w) {
  if (!w.empty()) s.push_back(w);
}

corpus::Sentence source_side(const Clause& c) {
  corpus::Sentence s;
  for (const NounPhrase* np : {&c.subject}) {
    push(s, np->det);
    push(s, np->adj);
    push(s, np->noun);
  }
  push(s, c.verb);
  push(s, c.object.det);
  push(s, c.object.adj);
  push(s, c.object.noun);
  push(s, c.adverb);
  return s;
}

corpus::Sentence target_side(const Clause& c, const GoldTable& gold) {
  const auto tr = [&](const std::string& w) { return w.empty() ? w : gold.at(w); };
  corpus::Sentence t;
  for (const NounPhrase* np : {&c.subject, &c.object}) {
    push(t, tr(np->noun));
    push(t, tr(np->adj));
    push(t, tr(np->det));
  }
  push(t, tr(c.verb));
  push(t, tr(c.adverb));
  return t;
}

Lexicon make_lexicon(const LowResourceConfig& cfg, Rng& rng) {
  // Class shares of the vocabulary: determiners and adverbs are small closed classes.
  const std::size_t n = std::max<std::size_t>(cfg.vocab, 20);
  const std::size_t det = std::max<std::size_t>(n / 50, 2);
  const std::size_t adv = std::max<std::size_t>(n / 20, 2);
  const std::size_t adj = n * 23 / 100;
  const std::size_t verb = n * 27 / 100;
  const std::size_t noun = n - det - adv - adj - verb;

  Lexicon lex;
  std::set<std::string> src_taken, tgt_taken;
  WordMaker src_maker(kSourceConsonants, rng());
  WordMaker tgt_maker(kTargetConsonants, rng());
  const std::vector<std::pair<WordClass, std::size_t>> classes = {
      {WordClass::Det, det}, {WordClass::Adj, adj}, {WordClass::Noun, noun}, {WordClass::Verb, verb}, {WordClass::Adv, adv}};
  std::size_t open_total = adj + noun + verb;
  const std::size_t tail_total = static_cast<std::size_t>(std::llround(cfg.tail_fraction * static_cast<double>(n)));
  std::size_t tail_left = tail_total;
  for (const auto& [cls, count] : classes) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < count; ++i) {
      const std::string s = src_maker.make(src_taken);
      lex.gold.emplace(s, tgt_maker.make(tgt_taken));
      words.push_back(s);
    }
    std::size_t tail_here = 0;
    const bool open = cls == WordClass::Adj || cls == WordClass::Noun || cls == WordClass::Verb;
    if (open && open_total > 0) {
      tail_here = cls == WordClass::Verb ? tail_left : tail_total * count / open_total;
      tail_here = std::min(tail_here, count - 1);
      tail_left -= std::min(tail_left, tail_here);
    }
    lex.head[cls].assign(words.begin(), words.end() - static_cast<std::ptrdiff_t>(tail_here));
    lex.tail[cls].assign(words.end() - static_cast<std::ptrdiff_t>(tail_here), words.end());
    lex.tail_words.insert(lex.tail[cls].begin(), lex.tail[cls].end());
  }
  return lex;
}

corpus::ParallelCorpus sample_corpus(const Grammar& g, const GoldTable& gold, std::size_t pairs, Rng& rng) {
  corpus::ParallelCorpus c;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Clause cl = g.clause(rng);
    c.add({source_side(cl), target_side(cl, gold)});
  }
  return c;
}

}  // namespace

CipherData make_cipher(std::size_t pairs, std::size_t vocab, std::uint64_t seed, std::size_t min_len,
                       std::size_t max_len) {
  if (vocab == 0 || min_len == 0 || min_len > max_len) throw Error(ErrorCode::InvalidArgument, "bad cipher shape");
  Rng rng(seed);
  CipherData data;
  std::set<std::string> src_taken, tgt_taken;
  WordMaker src(kSourceConsonants, rng()), tgt(kTargetConsonants, rng());
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab; ++i) {
    words.push_back(src.make(src_taken));
    data.gold.emplace(words.back(), tgt.make(tgt_taken));
  }
  for (std::size_t p = 0; p < pairs; ++p) {
    corpus::SentencePair pair;
    const std::size_t len = uniform(rng, min_len, max_len);
    for (std::size_t i = 0; i < len; ++i) {
      const std::string& w = words[uniform(rng, 0, vocab - 1)];
      pair.source.push_back(w);
      pair.target.push_back(data.gold.at(w));
    }
    data.corpus.add(std::move(pair));
  }
  return data;
}

corpus::ParallelCorpus make_copy(std::size_t pairs, std::size_t symbols, std::uint64_t seed, std::size_t min_len,
                                 std::size_t max_len) {
  if (symbols == 0 || min_len == 0 || min_len > max_len) throw Error(ErrorCode::InvalidArgument, "bad copy shape");
  Rng rng(seed);
  corpus::ParallelCorpus c;
  for (std::size_t p = 0; p < pairs; ++p) {
    corpus::Sentence s;
    const std::size_t len = uniform(rng, min_len, max_len);
    for (std::size_t i = 0; i < len; ++i) s.push_back("c" + std::to_string(uniform(rng, 0, symbols - 1)));
    c.add({s, s});
  }
  return c;
}

LowResourceData make_low_resource(const LowResourceConfig& config) {
  Rng rng(config.seed);
  LowResourceData data;
  data.lexicon = make_lexicon(config, rng);
  const Grammar g(data.lexicon, config);
  data.train = sample_corpus(g, data.lexicon.gold, config.train_pairs, rng);
  data.dev = sample_corpus(g, data.lexicon.gold, config.dev_pairs, rng);
  data.test = sample_corpus(g, data.lexicon.gold, config.test_pairs, rng);
  return data;
}

OovSuite make_oov_suite(const Lexicon& lexicon, std::size_t sentences, std::uint64_t seed) {
  Rng rng(seed);
  LowResourceConfig plain;
  plain.tail_mass = 0.0;
  const Grammar g(lexicon, plain);

  std::set<std::string> src_taken, tgt_taken;
  for (const auto& [s, t] : lexicon.gold) {
    src_taken.insert(s);
    tgt_taken.insert(t);
  }
  WordMaker src(kSourceConsonants, rng()), tgt(kTargetConsonants, rng());
  // Similar words come from the most frequent nouns, where the model is reliable.
  const auto& nouns = lexicon.head.at(WordClass::Noun);
  const std::size_t pool = std::min<std::size_t>(nouns.size(), 20);

  OovSuite suite;
  for (std::size_t i = 0; i < sentences; ++i) {
    Clause cl = g.clause(rng);
    NounPhrase& slot = coin(rng, 0.5) ? cl.subject : cl.object;
    const std::set<std::string> present = {cl.subject.noun, cl.object.noun};
    std::vector<std::string> similars;
    while (similars.size() < 2) {
      const std::string& cand = nouns[uniform(rng, 0, pool - 1)];
      if (!present.count(cand) && std::find(similars.begin(), similars.end(), cand) == similars.end()) {
        similars.push_back(cand);
      }
    }
    const bool in_vocab = i % 2 == 0;
    oov::OovEntry entry;
    entry.source = src.make(src_taken);
    entry.source_similars = similars;
    for (const auto& s : similars) entry.target_similars.push_back(lexicon.gold.at(s));
    entry.translation = in_vocab ? lexicon.gold.at(similars[0]) : tgt.make(tgt_taken);

    GoldTable gold = lexicon.gold;
    gold.emplace(entry.source, entry.translation);
    slot.noun = entry.source;
    suite.test.add({source_side(cl), target_side(cl, gold)});
    suite.annotations.push_back(eval::OovAnnotation{i, entry.source, entry.translation,
                                                    in_vocab ? eval::OovSubset::TInv : eval::OovSubset::TOov});
    suite.table.add(std::move(entry));
  }
  return suite;
}

}  // namespace mnmt::synthetic
