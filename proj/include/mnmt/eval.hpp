#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mnmt/corpus.hpp"

namespace mnmt::eval {

using corpus::Sentence;

struct BleuReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

// Corpus BLEU over case-folded tokens, n <= 4, clipped counts, no smoothing.
// The effective reference length per sentence is the closest one (shorter on ties).
BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<std::vector<Sentence>>& references);
BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

// Add-one smoothed sentence BLEU; a diagnostic only, never used for corpus scores.
double sentence_bleu(const Sentence& hypothesis, const std::vector<Sentence>& references);

enum class OovSubset { TInv, TOov };

struct OovAnnotation {
  std::size_t sentence = 0;
  std::string oov_source;
  std::string gold_translation;
  OovSubset subset = OovSubset::TInv;
};

// "index \t oov \t gold \t T-INV|T-OOV" per line.
std::vector<OovAnnotation> load_oov_annotations(const std::filesystem::path& path);
void save_oov_annotations(const std::filesystem::path& path, const std::vector<OovAnnotation>& annotations,
                          const std::string& header_line);

struct RecallCounts {
  std::size_t hits = 0;
  std::size_t total = 0;
  double recall() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
};

struct RecallReport {
  RecallCounts t_inv;
  RecallCounts t_oov;
  RecallCounts overall;
};

// An OOV counts as recalled when its gold translation occurs in that sentence's output.
RecallReport oov_recall(const std::vector<Sentence>& outputs, const std::vector<OovAnnotation>& annotations);

struct FrequencyBin {
  std::size_t sentences = 0;
  std::size_t hits = 0;
  std::size_t reference_words = 0;
  double recall() const {
    return reference_words == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(reference_words);
  }
};

// Bin of a sentence with minimum source training frequency m:
//   0: m <= b0,  1: b0 < m <= b1,  2: b1 < m <= b2,  3: m > b2.
struct FrequencyBins {
  std::array<std::size_t, 3> boundaries{};
  std::array<FrequencyBin, 4> bins{};
  std::vector<std::size_t> assignment;  // bin per sentence
};

std::size_t min_training_frequency(const Sentence& source, const corpus::FrequencyTable& counts);

// Quartiles (nearest rank) of the per-sentence minimum frequencies.
std::array<std::size_t, 3> default_boundaries(const std::vector<Sentence>& sources, const corpus::FrequencyTable& counts);

// Token-level hits with clipping by reference counts; with several references the
// one giving most hits is used (first on ties).
FrequencyBins frequency_analysis(const std::vector<Sentence>& outputs, const std::vector<std::vector<Sentence>>& references,
                                 const std::vector<Sentence>& sources, const corpus::FrequencyTable& training_counts,
                                 const std::array<std::size_t, 3>& boundaries);

std::string format_bleu(const BleuReport& report);
std::string format_recall(const RecallReport& report);

}  // namespace mnmt::eval
