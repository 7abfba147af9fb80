#include "mnmt/oov.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mnmt/common.hpp"

namespace mnmt::oov {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  if (items.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(',');
    out += items[i];
  }
  return out;
}

}  // namespace

void OovDictionary::add(OovEntry entry) {
  if (index_.contains(entry.source)) {
    throw Error(ErrorCode::Format, "duplicate OOV entry for '" + entry.source + "'");
  }
  index_.emplace(entry.source, entries_.size());
  entries_.push_back(std::move(entry));
}

const OovEntry* OovDictionary::find(const std::string& source) const {
  auto it = index_.find(source);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void OovDictionary::validate(const corpus::Vocabulary& source_vocab, const corpus::Vocabulary& target_vocab) const {
  for (const auto& e : entries_) {
    if (e.source_similars.empty()) throw Error(ErrorCode::Format, "OOV '" + e.source + "' has no source similars");
    for (const auto& s : e.source_similars) {
      if (!source_vocab.contains(s)) {
        throw Error(ErrorCode::Format, "source similar '" + s + "' of '" + e.source + "' is not in the vocabulary");
      }
    }
    for (const auto& t : e.target_similars) {
      if (!target_vocab.contains(t)) {
        throw Error(ErrorCode::Format, "target similar '" + t + "' of '" + e.source + "' is not in the vocabulary");
      }
    }
    if (!target_vocab.contains(e.translation) && e.target_similars.empty()) {
      throw Error(ErrorCode::Format, "OOV translation '" + e.translation + "' needs target similars");
    }
  }
}

OovDictionary OovDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  OovDictionary dict;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && is_artifact_header(line))) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    OovEntry e;
    e.source = fields[0];
    e.translation = fields[1];
    e.source_similars = split(fields[2], ',');
    if (fields[3] != "-") e.target_similars = split(fields[3], ',');
    dict.add(std::move(e));
  }
  return dict;
}

void OovDictionary::save(const std::filesystem::path& path, const std::string& header_line) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header_line << '\n';
  for (const auto& e : entries_) {
    out << e.source << '\t' << e.translation << '\t' << join_list(e.source_similars) << '\t'
        << join_list(e.target_similars) << '\n';
  }
}

Substitution substitute_source(const corpus::Sentence& tokens, const OovDictionary& dict,
                               const corpus::Vocabulary& source_vocab) {
  Substitution out{tokens, {}, std::vector<bool>(tokens.size(), false)};
  std::unordered_map<std::string, std::string> borrowed_for;
  for (std::size_t j = 0; j < out.tokens.size(); ++j) {
    const std::string original = tokens[j];
    if (source_vocab.contains(original)) continue;
    const OovEntry* entry = dict.find(original);
    if (entry == nullptr) continue;
    std::string chosen;
    if (auto it = borrowed_for.find(original); it != borrowed_for.end()) {
      chosen = it->second;
    } else {
      for (const auto& cand : entry->source_similars) {
        if (std::find(out.tokens.begin(), out.tokens.end(), cand) == out.tokens.end()) {
          chosen = cand;
          break;
        }
      }
    }
    if (chosen.empty()) {
      warn("NoUsableCandidate: every source similar of '" + original + "' already occurs in the sentence");
      continue;
    }
    borrowed_for[original] = chosen;
    out.tokens[j] = chosen;
    out.substituted[j] = true;
    out.record.entries.push_back(Redirection{chosen, original, BorrowSide::Source, j});
  }
  return out;
}

memory::LocalMemory inject_oov_memory(memory::LocalMemory local, RedirectionRecord& record, const OovDictionary& dict,
                                      const num::Tensor& annotations, const corpus::Vocabulary& target_vocab) {
  std::vector<Redirection> source_side;
  for (const auto& r : record.entries) {
    if (r.side == BorrowSide::Source) source_side.push_back(r);
  }
  // In-vocabulary translations first so that target similars can avoid them.
  for (const auto& r : source_side) {
    const OovEntry* entry = dict.find(r.oov);
    if (entry == nullptr || !target_vocab.contains(entry->translation)) continue;
    local.add_occurrence(target_vocab.id(entry->translation), entry->translation, r.position, 1.0, annotations);
  }
  std::unordered_map<std::string, std::string> similar_for;
  for (const auto& r : source_side) {
    const OovEntry* entry = dict.find(r.oov);
    if (entry == nullptr || target_vocab.contains(entry->translation)) continue;
    std::string chosen;
    if (auto it = similar_for.find(entry->translation); it != similar_for.end()) {
      chosen = it->second;
    } else {
      for (const auto& cand : entry->target_similars) {
        if (target_vocab.contains(cand) && !local.contains_target(target_vocab.id(cand))) {
          chosen = cand;
          break;
        }
      }
      if (chosen.empty()) {
        warn("NoUsableCandidate: every target similar of '" + entry->translation +
             "' already is a local-memory target; element skipped");
        continue;
      }
      similar_for.emplace(entry->translation, chosen);
      record.entries.push_back(Redirection{chosen, entry->translation, BorrowSide::Target, r.position});
    }
    local.add_occurrence(target_vocab.id(chosen), chosen, r.position, 1.0, annotations);
  }
  return local;
}

corpus::Sentence redirect_output(const corpus::Sentence& output, const RedirectionRecord& record) {
  corpus::Sentence out = output;
  for (auto& w : out) {
    if (const Redirection* r = record.target_marked(w)) w = r->oov;
  }
  return out;
}

}  // namespace mnmt::oov
