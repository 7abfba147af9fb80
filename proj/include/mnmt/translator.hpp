#pragma once

#include <optional>
#include <vector>

#include "mnmt/aligner.hpp"
#include "mnmt/beam.hpp"
#include "mnmt/memory.hpp"
#include "mnmt/oov.hpp"

namespace mnmt::pipeline {

enum class Mode { Baseline, Memory, Lexical };

// Everything a decode needs; pointers are borrowed and must outlive the call.
struct Translator {
  const nmt::Model* model = nullptr;
  const corpus::Vocabulary* source_vocab = nullptr;
  const corpus::Vocabulary* target_vocab = nullptr;
  const memory::GlobalMemory* global = nullptr;        // Mode::Memory
  const memory::MemoryAttention* attention = nullptr;  // Mode::Memory
  const align::TranslationDictionary* lexicon = nullptr;  // Mode::Lexical
  const oov::OovDictionary* oov_table = nullptr;       // optional
};

struct TranslateOptions {
  Mode mode = Mode::Memory;
  double beta = 0.3;
  nmt::BeamConfig beam;
  std::size_t threads = 0;
};

// Translates one tokenized sentence; an empty input yields an empty output.
corpus::Sentence translate_sentence(const Translator& t, const corpus::Sentence& source, const TranslateOptions& options);

// Sentences are decoded concurrently; output order equals input order.
std::vector<corpus::Sentence> translate_all(const Translator& t, const std::vector<corpus::Sentence>& sources,
                                            const TranslateOptions& options);

}  // namespace mnmt::pipeline
