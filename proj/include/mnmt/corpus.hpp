#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mnmt::corpus {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr std::size_t kReservedCount = 4;
inline const std::array<std::string, kReservedCount> kReservedTokens = {"<pad>", "<unk>", "<s>", "</s>"};

using Sentence = std::vector<std::string>;
using Ids = std::vector<int>;

bool is_reserved(std::string_view token);

// Whitespace split with ASCII lowercasing. Multi-byte UTF-8 sequences pass through.
Sentence tokenize(std::string_view line);
std::string join(const Sentence& tokens);

class Vocabulary {
 public:
  Vocabulary();  // reserved symbols only

  // Appends a token; returns its id. Existing tokens keep their id.
  int add(const std::string& token);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // kUnk when absent
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // One token per line, line number = id (after the artifact header line).
  void save(const std::filesystem::path& path, const std::string& header_line) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SentencePair {
  Sentence source;
  Sentence target;
};

// Token counts that remember first-occurrence order, for deterministic tie-breaks.
class FrequencyTable {
 public:
  void add(const std::string& token, std::size_t n = 1);
  std::size_t count(std::string_view token) const;
  std::size_t total() const noexcept { return total_; }
  const std::vector<std::string>& first_seen_order() const noexcept { return order_; }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

class ParallelCorpus {
 public:
  ParallelCorpus() = default;
  explicit ParallelCorpus(std::vector<SentencePair> pairs);

  // Rejects empty sides and reserved symbols.
  void add(SentencePair pair);

  const std::vector<SentencePair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const FrequencyTable& source_counts() const noexcept { return source_counts_; }
  const FrequencyTable& target_counts() const noexcept { return target_counts_; }

  // Reads <prefix>.src and <prefix>.tgt; invalid lines are skipped with a warning.
  static ParallelCorpus load(const std::filesystem::path& prefix);
  void save(const std::filesystem::path& prefix, const std::string& header_line) const;

 private:
  std::vector<SentencePair> pairs_;
  FrequencyTable source_counts_;
  FrequencyTable target_counts_;
};

// Tokenized lines of a plain text file; a leading artifact header is skipped.
std::vector<Sentence> read_sentences(const std::filesystem::path& path);
void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                     const std::string& header_line);

enum class Side { Source, Target };

// Reserved symbols plus the (max_size - 4) most frequent tokens of one side,
// frequency ties broken by first occurrence.
Vocabulary build_vocab(const ParallelCorpus& corpus, Side side, std::size_t max_size);

Ids encode(const Sentence& tokens, const Vocabulary& vocab);
Sentence decode(const Ids& ids, const Vocabulary& vocab);

}  // namespace mnmt::corpus
