#include "mnmt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include "mnmt/common.hpp"

namespace mnmt::corpus {

bool is_reserved(std::string_view token) {
  return std::find(kReservedTokens.begin(), kReservedTokens.end(), token) != kReservedTokens.end();
}

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::string current;
  for (char ch : line) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string join(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// ---- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const auto& t : kReservedTokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::InvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path, const std::string& header_line) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header_line << '\n';
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && is_artifact_header(line)) {
      first = false;
      continue;
    }
    first = false;
    lines.push_back(line);
  }
  if (lines.size() < kReservedCount ||
      !std::equal(kReservedTokens.begin(), kReservedTokens.end(), lines.begin())) {
    throw Error(ErrorCode::Format, path.string() + ": vocabulary must start with the reserved symbols");
  }
  Vocabulary v;
  for (std::size_t i = kReservedCount; i < lines.size(); ++i) {
    if (v.contains(lines[i])) throw Error(ErrorCode::Format, path.string() + ": duplicate token " + lines[i]);
    v.add(lines[i]);
  }
  return v;
}

// ---- FrequencyTable / ParallelCorpus ---------------------------------------------

void FrequencyTable::add(const std::string& token, std::size_t n) {
  auto [it, inserted] = counts_.try_emplace(token, 0);
  if (inserted) order_.push_back(token);
  it->second += n;
  total_ += n;
}

std::size_t FrequencyTable::count(std::string_view token) const {
  auto it = counts_.find(std::string(token));
  return it == counts_.end() ? 0 : it->second;
}

ParallelCorpus::ParallelCorpus(std::vector<SentencePair> pairs) {
  for (auto& p : pairs) add(std::move(p));
}

void ParallelCorpus::add(SentencePair pair) {
  if (pair.source.empty() || pair.target.empty()) {
    throw Error(ErrorCode::InvalidArgument, "sentence pair with an empty side");
  }
  auto reserved = [](const Sentence& s) { return std::any_of(s.begin(), s.end(), [](const auto& t) { return is_reserved(t); }); };
  if (reserved(pair.source) || reserved(pair.target)) {
    throw Error(ErrorCode::InvalidArgument, "sentence pair contains a reserved symbol");
  }
  for (const auto& t : pair.source) source_counts_.add(t);
  for (const auto& t : pair.target) target_counts_.add(t);
  pairs_.push_back(std::move(pair));
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<Sentence> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && is_artifact_header(line)) {
      first = false;
      continue;
    }
    first = false;
    out.push_back(tokenize(line));
  }
  return out;
}

void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                     const std::string& header_line) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  if (!header_line.empty()) out << header_line << '\n';
  for (const auto& s : sentences) out << join(s) << '\n';
}

ParallelCorpus ParallelCorpus::load(const std::filesystem::path& prefix) {
  const auto src = read_sentences(prefix.string() + ".src");
  const auto tgt = read_sentences(prefix.string() + ".tgt");
  if (src.size() != tgt.size()) {
    throw Error(ErrorCode::LengthMismatch, prefix.string() + ": .src has " + std::to_string(src.size()) +
                                               " lines, .tgt has " + std::to_string(tgt.size()));
  }
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < src.size(); ++i) {
    try {
      corpus.add(SentencePair{src[i], tgt[i]});
    } catch (const Error& e) {
      warn(prefix.string() + " line " + std::to_string(i + 1) + " skipped: " + e.what());
    }
  }
  return corpus;
}

void ParallelCorpus::save(const std::filesystem::path& prefix, const std::string& header_line) const {
  std::vector<Sentence> src, tgt;
  for (const auto& p : pairs_) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  write_sentences(prefix.string() + ".src", src, header_line);
  write_sentences(prefix.string() + ".tgt", tgt, header_line);
}

// ---- vocabulary construction and id mapping ------------------------------------

Vocabulary build_vocab(const ParallelCorpus& corpus, Side side, std::size_t max_size) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from an empty corpus");
  if (max_size < kReservedCount + 1) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary max_size must be at least 5");
  }
  const FrequencyTable& counts = side == Side::Source ? corpus.source_counts() : corpus.target_counts();
  const auto& order = counts.first_seen_order();
  std::vector<std::size_t> rank(order.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return counts.count(order[a]) > counts.count(order[b]);
  });
  Vocabulary vocab;
  const std::size_t keep = std::min(order.size(), max_size - kReservedCount);
  for (std::size_t i = 0; i < keep; ++i) vocab.add(order[rank[i]]);
  return vocab;
}

Ids encode(const Sentence& tokens, const Vocabulary& vocab) {
  Ids ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

Sentence decode(const Ids& ids, const Vocabulary& vocab) {
  Sentence out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace mnmt::corpus
