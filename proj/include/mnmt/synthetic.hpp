#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/eval.hpp"
#include "mnmt/oov.hpp"

namespace mnmt::synthetic {

using GoldTable = std::map<std::string, std::string>;  // source word -> target word

struct CipherData {
  corpus::ParallelCorpus corpus;
  GoldTable gold;
};

// One-to-one word substitution, monotone order, uniform word choice.
CipherData make_cipher(std::size_t pairs, std::size_t vocab, std::uint64_t seed, std::size_t min_len = 3,
                       std::size_t max_len = 8);

// target == source over `symbols` symbols.
corpus::ParallelCorpus make_copy(std::size_t pairs, std::size_t symbols, std::uint64_t seed, std::size_t min_len = 3,
                                 std::size_t max_len = 8);

struct LowResourceConfig {
  std::size_t train_pairs = 2000;
  std::size_t dev_pairs = 200;
  std::size_t test_pairs = 200;
  std::size_t vocab = 300;       // per side
  double tail_fraction = 0.05;   // share of the vocabulary designated as the rare tail
  double tail_mass = 0.05;       // probability that a content slot draws from the tail
  double zipf_exponent = 1.0;    // within-class skew of the head words
  std::uint64_t seed = 7;
};

// Word classes of the toy grammar.
enum class WordClass { Det, Adj, Noun, Verb, Adv };

struct Lexicon {
  std::map<WordClass, std::vector<std::string>> head;  // by decreasing sampling weight
  std::map<WordClass, std::vector<std::string>> tail;
  GoldTable gold;
  std::set<std::string> tail_words;  // source side
};

// Source: [det] [adj] noun verb [det] [adj] noun [adv]
// Target: noun' [adj'] [det'] noun' [adj'] [det'] verb' [adv']  (SOV, post-nominal modifiers)
struct LowResourceData {
  corpus::ParallelCorpus train, dev, test;
  Lexicon lexicon;
};

LowResourceData make_low_resource(const LowResourceConfig& config);

// Sentences from the same grammar, each with one unseen source noun. Half the
// unseen words translate to an in-vocabulary target noun (T-INV), half to an
// unseen target word (T-OOV).
struct OovSuite {
  corpus::ParallelCorpus test;
  oov::OovDictionary table;
  std::vector<eval::OovAnnotation> annotations;
};

OovSuite make_oov_suite(const Lexicon& lexicon, std::size_t sentences, std::uint64_t seed);

}  // namespace mnmt::synthetic
