#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/redirection.hpp"

namespace mnmt::oov {

struct OovEntry {
  std::string source;       // the OOV word
  std::string translation;  // its single translation (may itself be OOV)
  std::vector<std::string> source_similars;
  std::vector<std::string> target_similars;  // needed when the translation is OOV
};

class OovDictionary {
 public:
  void add(OovEntry entry);
  const OovEntry* find(const std::string& source) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<OovEntry>& entries() const noexcept { return entries_; }

  // Every similar candidate must be in-vocabulary; target similars must be
  // present whenever the translation is OOV. Throws Format otherwise.
  void validate(const corpus::Vocabulary& source_vocab, const corpus::Vocabulary& target_vocab) const;

  // "oov_src \t translation \t src_similars(comma-sep) \t tgt_similars(comma-sep or -)".
  static OovDictionary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path, const std::string& header_line) const;

 private:
  std::vector<OovEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Substitution {
  corpus::Sentence tokens;
  RedirectionRecord record;
  std::vector<bool> substituted;  // per position
};

// Replaces each OOV source token that has a dictionary entry by its first
// similar word not already present in the sentence. Repeated OOVs reuse the
// same borrowed word. An OOV with no usable candidate stays (as UNK) with a warning.
Substitution substitute_source(const corpus::Sentence& tokens, const OovDictionary& dict,
                               const corpus::Vocabulary& source_vocab);

// Adds one element per substituted position: (translation, h_j) when the
// translation is in-vocabulary, otherwise (target similar, h_j) with the similar
// word marked for redirection in `record`. Target similars never collide with
// existing local-memory targets.
memory::LocalMemory inject_oov_memory(memory::LocalMemory local, RedirectionRecord& record, const OovDictionary& dict,
                                      const num::Tensor& annotations, const corpus::Vocabulary& target_vocab);

// Rewrites every occurrence of a target-marked borrowed word to its OOV surface form.
corpus::Sentence redirect_output(const corpus::Sentence& output, const RedirectionRecord& record);

}  // namespace mnmt::oov
