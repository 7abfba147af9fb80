#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnmt/corpus.hpp"

namespace mnmt::align {

inline const std::string kNullToken = "<null>";

// fwd: p(target | source) with a NULL source word.
// rev: p(source | target) with a NULL target word.
enum class Direction { Forward, Reverse };

// Conditional table p(emitted | given). For Direction::Forward "given" is the
// source word; for Reverse it is the target word.
class LexicalTable {
 public:
  double prob(const std::string& given, const std::string& emitted) const;
  // Distribution over emitted words for one conditioning word (empty when unknown).
  const std::unordered_map<std::string, double>& row(const std::string& given) const;
  const std::unordered_map<std::string, std::unordered_map<std::string, double>>& rows() const noexcept {
    return table_;
  }
  void set(const std::string& given, const std::string& emitted, double p) { table_[given][emitted] = p; }

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
};

struct Ibm1Result {
  LexicalTable table;
  // Corpus log-likelihood under the table before each EM iteration and after the last one.
  std::vector<double> log_likelihood;
};

Ibm1Result train_ibm1(const corpus::ParallelCorpus& corpus, Direction direction, std::size_t iterations);

// Sum over pairs and emitted positions of log( 1/(l+1) * sum_{given in NULL+sentence} p(emitted|given) ).
double ibm1_log_likelihood(const corpus::ParallelCorpus& corpus, const LexicalTable& table, Direction direction);

struct Link {
  std::size_t source;
  std::size_t target;
  auto operator<=>(const Link&) const = default;
};

// Sorted, duplicate-free links of one sentence pair, always in (source, target) orientation.
using AlignmentLinks = std::vector<Link>;

// Each emitted position links to the argmax conditioning position; NULL wins only
// when strictly better than every real position, ties go to the leftmost position.
// A word with zero probability under every real position stays unaligned.
AlignmentLinks viterbi_align(const corpus::SentencePair& pair, const LexicalTable& table, Direction direction);

AlignmentLinks intersect(const AlignmentLinks& fwd, const AlignmentLinks& rev);

bool is_one_to_one(const AlignmentLinks& links);

struct DictEntry {
  std::string source;
  std::string target;
  double p_target_given_source;
  double p_source_given_target;
};

class TranslationDictionary {
 public:
  TranslationDictionary() = default;
  explicit TranslationDictionary(std::vector<DictEntry> entries);

  const std::vector<DictEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // Candidates of one source word sorted by p(t|s) descending, then target.
  std::vector<const DictEntry*> candidates(const std::string& source) const;
  const DictEntry* find(const std::string& source, const std::string& target) const;

  // Tab-separated "w_s  w_t  p(t|s)  p(s|t)" sorted by (w_s, -p(t|s)).
  void save(const std::filesystem::path& path, const std::string& header_line) const;
  static TranslationDictionary load(const std::filesystem::path& path);

 private:
  std::vector<DictEntry> entries_;  // kept in file order
  std::unordered_map<std::string, std::vector<std::size_t>> by_source_;
};

// Relative frequencies over intersected links. Throws NoLinks when there are none.
TranslationDictionary extract_dictionary(const corpus::ParallelCorpus& corpus,
                                         std::span<const AlignmentLinks> links);

// Keeps the k best targets per source word; conditionals are not renormalised.
TranslationDictionary filter_top_k(const TranslationDictionary& dict, std::size_t k);

struct AlignmentRun {
  Ibm1Result forward;
  Ibm1Result reverse;
  std::vector<AlignmentLinks> links;  // intersected, per pair
  TranslationDictionary dictionary;   // before top-k filtering
};

// Both directions of IBM Model 1, Viterbi links, intersection, extraction.
AlignmentRun align_corpus(const corpus::ParallelCorpus& corpus, std::size_t iterations);

}  // namespace mnmt::align
