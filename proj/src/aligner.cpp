#include "mnmt/aligner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mnmt/common.hpp"

namespace mnmt::align {

namespace {

const corpus::Sentence& given_side(const corpus::SentencePair& p, Direction d) {
  return d == Direction::Forward ? p.source : p.target;
}
const corpus::Sentence& emitted_side(const corpus::SentencePair& p, Direction d) {
  return d == Direction::Forward ? p.target : p.source;
}

const std::unordered_map<std::string, double> kEmptyRow;

bool entry_order(const DictEntry& a, const DictEntry& b) {
  if (a.source != b.source) return a.source < b.source;
  if (a.p_target_given_source != b.p_target_given_source) return a.p_target_given_source > b.p_target_given_source;
  return a.target < b.target;
}

}  // namespace

double LexicalTable::prob(const std::string& given, const std::string& emitted) const {
  auto it = table_.find(given);
  if (it == table_.end()) return 0.0;
  auto jt = it->second.find(emitted);
  return jt == it->second.end() ? 0.0 : jt->second;
}

const std::unordered_map<std::string, double>& LexicalTable::row(const std::string& given) const {
  auto it = table_.find(given);
  return it == table_.end() ? kEmptyRow : it->second;
}

double ibm1_log_likelihood(const corpus::ParallelCorpus& corpus, const LexicalTable& table, Direction direction) {
  double ll = 0.0;
  for (const auto& pair : corpus.pairs()) {
    const auto& given = given_side(pair, direction);
    const double norm = 1.0 / static_cast<double>(given.size() + 1);
    for (const auto& e : emitted_side(pair, direction)) {
      double s = table.prob(kNullToken, e);
      for (const auto& g : given) s += table.prob(g, e);
      ll += std::log(norm * s);
    }
  }
  return ll;
}

Ibm1Result train_ibm1(const corpus::ParallelCorpus& corpus, Direction direction, std::size_t iterations) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "IBM Model 1 needs at least one sentence pair");
  if (iterations == 0) throw Error(ErrorCode::InvalidArgument, "IBM Model 1 needs at least one iteration");

  // Uniform start over co-occurring words.
  std::unordered_map<std::string, std::unordered_map<std::string, double>> cooc;
  for (const auto& pair : corpus.pairs()) {
    for (const auto& e : emitted_side(pair, direction)) {
      cooc[kNullToken][e] = 1.0;
      for (const auto& g : given_side(pair, direction)) cooc[g][e] = 1.0;
    }
  }
  Ibm1Result result;
  for (auto& [g, row] : cooc) {
    const double u = 1.0 / static_cast<double>(row.size());
    for (auto& [e, p] : row) result.table.set(g, e, u);
  }

  std::vector<const std::string*> given_words;
  for (std::size_t it = 0; it < iterations; ++it) {
    result.log_likelihood.push_back(ibm1_log_likelihood(corpus, result.table, direction));
    std::unordered_map<std::string, std::unordered_map<std::string, double>> counts;
    for (const auto& pair : corpus.pairs()) {
      given_words.clear();
      given_words.push_back(&kNullToken);
      for (const auto& g : given_side(pair, direction)) given_words.push_back(&g);
      for (const auto& e : emitted_side(pair, direction)) {
        double denom = 0.0;
        for (const auto* g : given_words) denom += result.table.prob(*g, e);
        for (const auto* g : given_words) counts[*g][e] += result.table.prob(*g, e) / denom;
      }
    }
    LexicalTable next;
    for (const auto& [g, row] : counts) {
      double total = 0.0;
      for (const auto& [e, c] : row) total += c;
      for (const auto& [e, c] : row) next.set(g, e, c / total);
    }
    result.table = std::move(next);
  }
  result.log_likelihood.push_back(ibm1_log_likelihood(corpus, result.table, direction));
  return result;
}

AlignmentLinks viterbi_align(const corpus::SentencePair& pair, const LexicalTable& table, Direction direction) {
  const auto& given = given_side(pair, direction);
  const auto& emitted = emitted_side(pair, direction);
  AlignmentLinks links;
  for (std::size_t e = 0; e < emitted.size(); ++e) {
    double best = -1.0;
    std::size_t best_pos = 0;
    for (std::size_t g = 0; g < given.size(); ++g) {
      const double p = table.prob(given[g], emitted[e]);
      if (p > best) {
        best = p;
        best_pos = g;
      }
    }
    // No evidence for any real position, or NULL strictly better: leave unaligned.
    if (given.empty() || best <= 0.0 || table.prob(kNullToken, emitted[e]) > best) continue;
    links.push_back(direction == Direction::Forward ? Link{best_pos, e} : Link{e, best_pos});
  }
  std::sort(links.begin(), links.end());
  return links;
}

AlignmentLinks intersect(const AlignmentLinks& fwd, const AlignmentLinks& rev) {
  AlignmentLinks a = fwd, b = rev, out;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_one_to_one(const AlignmentLinks& links) {
  std::vector<std::size_t> src, tgt;
  for (const auto& l : links) {
    src.push_back(l.source);
    tgt.push_back(l.target);
  }
  std::sort(src.begin(), src.end());
  std::sort(tgt.begin(), tgt.end());
  return std::adjacent_find(src.begin(), src.end()) == src.end() &&
         std::adjacent_find(tgt.begin(), tgt.end()) == tgt.end();
}

// ---- TranslationDictionary -------------------------------------------------------

TranslationDictionary::TranslationDictionary(std::vector<DictEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), entry_order);
  for (std::size_t i = 0; i < entries_.size(); ++i) by_source_[entries_[i].source].push_back(i);
}

std::vector<const DictEntry*> TranslationDictionary::candidates(const std::string& source) const {
  std::vector<const DictEntry*> out;
  if (auto it = by_source_.find(source); it != by_source_.end()) {
    for (std::size_t i : it->second) out.push_back(&entries_[i]);
  }
  return out;
}

const DictEntry* TranslationDictionary::find(const std::string& source, const std::string& target) const {
  for (const auto* e : candidates(source)) {
    if (e->target == target) return e;
  }
  return nullptr;
}

void TranslationDictionary::save(const std::filesystem::path& path, const std::string& header_line) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header_line << '\n';
  out.precision(17);
  for (const auto& e : entries_) {
    out << e.source << '\t' << e.target << '\t' << e.p_target_given_source << '\t' << e.p_source_given_target
        << '\n';
  }
}

TranslationDictionary TranslationDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<DictEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && is_artifact_header(line))) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 4) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    DictEntry e{fields[0], fields[1], 0.0, 0.0};
    try {
      e.p_target_given_source = std::stod(fields[2]);
      e.p_source_given_target = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": bad probability");
    }
    if (!(e.p_target_given_source > 0.0 && e.p_target_given_source <= 1.0) ||
        !(e.p_source_given_target > 0.0 && e.p_source_given_target <= 1.0)) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": probability outside (0,1]");
    }
    entries.push_back(std::move(e));
  }
  return TranslationDictionary(std::move(entries));
}

TranslationDictionary extract_dictionary(const corpus::ParallelCorpus& corpus, std::span<const AlignmentLinks> links) {
  if (links.size() != corpus.size()) {
    throw Error(ErrorCode::LengthMismatch, "need one link set per sentence pair");
  }
  std::map<std::pair<std::string, std::string>, std::size_t> joint;
  std::unordered_map<std::string, std::size_t> src_total, tgt_total;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& pair = corpus.pairs()[i];
    for (const auto& l : links[i]) {
      const auto& s = pair.source.at(l.source);
      const auto& t = pair.target.at(l.target);
      ++joint[{s, t}];
      ++src_total[s];
      ++tgt_total[t];
    }
  }
  if (joint.empty()) throw Error(ErrorCode::NoLinks, "no alignment links survived intersection");
  std::vector<DictEntry> entries;
  for (const auto& [key, c] : joint) {
    entries.push_back(DictEntry{key.first, key.second,
                                static_cast<double>(c) / static_cast<double>(src_total[key.first]),
                                static_cast<double>(c) / static_cast<double>(tgt_total[key.second])});
  }
  return TranslationDictionary(std::move(entries));
}

TranslationDictionary filter_top_k(const TranslationDictionary& dict, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "top-k filter needs k >= 1");
  std::vector<DictEntry> kept;
  std::string current;
  std::size_t taken = 0;
  // entries() is already sorted by (source, -p(t|s), target).
  for (const auto& e : dict.entries()) {
    if (e.source != current) {
      current = e.source;
      taken = 0;
    }
    if (taken++ < k) kept.push_back(e);
  }
  return TranslationDictionary(std::move(kept));
}

AlignmentRun align_corpus(const corpus::ParallelCorpus& corpus, std::size_t iterations) {
  AlignmentRun run;
  run.forward = train_ibm1(corpus, Direction::Forward, iterations);
  run.reverse = train_ibm1(corpus, Direction::Reverse, iterations);
  run.links.reserve(corpus.size());
  for (const auto& pair : corpus.pairs()) {
    run.links.push_back(intersect(viterbi_align(pair, run.forward.table, Direction::Forward),
                                  viterbi_align(pair, run.reverse.table, Direction::Reverse)));
  }
  run.dictionary = extract_dictionary(corpus, run.links);
  return run;
}

}  // namespace mnmt::align
