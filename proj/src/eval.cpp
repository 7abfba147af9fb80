#include "mnmt/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mnmt/common.hpp"

namespace mnmt::eval {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

std::string fold(const std::string& w) {
  std::string out = w;
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

Sentence folded(const Sentence& s) {
  Sentence out;
  out.reserve(s.size());
  for (const auto& w : s) out.push_back(fold(w));
  return out;
}

NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
  return counts;
}

std::map<std::string, std::size_t> unigram_counts(const Sentence& s) {
  std::map<std::string, std::size_t> c;
  for (const auto& w : s) ++c[w];
  return c;
}

}  // namespace

BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<std::vector<Sentence>>& references) {
  if (hypotheses.size() != references.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(hypotheses.size()) + " hypotheses vs " +
                                               std::to_string(references.size()) + " reference sets");
  }
  BleuReport r;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    if (references[s].empty()) throw Error(ErrorCode::LengthMismatch, "sentence without a reference");
    const Sentence hyp = folded(hypotheses[s]);
    std::vector<Sentence> refs;
    for (const auto& ref : references[s]) refs.push_back(folded(ref));
    r.hypothesis_length += hyp.size();
    std::size_t best_len = refs[0].size();
    for (const auto& ref : refs) {
      const auto d = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
      if (d(ref.size()) < d(best_len) || (d(ref.size()) == d(best_len) && ref.size() < best_len)) best_len = ref.size();
    }
    r.reference_length += best_len;
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts h = ngrams(hyp, n);
      NgramCounts max_ref;
      for (const auto& ref : refs) {
        for (const auto& [g, c] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : h) {
        auto it = max_ref.find(g);
        r.matches[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
        r.totals[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] == 0 ? 0.0 : static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]);
    if (r.precisions[n] == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  const double c = static_cast<double>(r.hypothesis_length), ref = static_cast<double>(r.reference_length);
  r.brevity_penalty = c == 0.0 ? 0.0 : (c < ref ? std::exp(1.0 - ref / c) : 1.0);
  r.bleu = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  std::vector<std::vector<Sentence>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back({r});
  return bleu(hypotheses, refs);
}

double sentence_bleu(const Sentence& hypothesis, const std::vector<Sentence>& references) {
  const BleuReport r = bleu({hypothesis}, std::vector<std::vector<Sentence>>{references});
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    log_sum += std::log((static_cast<double>(r.matches[n]) + 1.0) / (static_cast<double>(r.totals[n]) + 1.0));
  }
  return r.brevity_penalty * std::exp(log_sum / 4.0);
}

// ---- OOV recall ---------------------------------------------------------------------

std::vector<OovAnnotation> load_oov_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<OovAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && is_artifact_header(line))) continue;
    std::stringstream ss(line);
    std::string idx, oov, gold, subset;
    if (!std::getline(ss, idx, '\t') || !std::getline(ss, oov, '\t') || !std::getline(ss, gold, '\t') ||
        !std::getline(ss, subset, '\t') || (subset != "T-INV" && subset != "T-OOV")) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": malformed OOV annotation");
    }
    try {
      out.push_back(OovAnnotation{std::stoul(idx), oov, gold, subset == "T-INV" ? OovSubset::TInv : OovSubset::TOov});
    } catch (const std::exception&) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": bad sentence index");
    }
  }
  return out;
}

void save_oov_annotations(const std::filesystem::path& path, const std::vector<OovAnnotation>& annotations,
                          const std::string& header_line) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header_line << '\n';
  for (const auto& a : annotations) {
    out << a.sentence << '\t' << a.oov_source << '\t' << a.gold_translation << '\t'
        << (a.subset == OovSubset::TInv ? "T-INV" : "T-OOV") << '\n';
  }
}

RecallReport oov_recall(const std::vector<Sentence>& outputs, const std::vector<OovAnnotation>& annotations) {
  if (annotations.empty()) throw Error(ErrorCode::EmptyTestSet, "no annotated OOV words");
  RecallReport r;
  for (const auto& a : annotations) {
    if (a.sentence >= outputs.size()) {
      throw Error(ErrorCode::LengthMismatch, "annotation refers to sentence " + std::to_string(a.sentence) +
                                                 " but only " + std::to_string(outputs.size()) + " outputs exist");
    }
    const Sentence out = folded(outputs[a.sentence]);
    const bool hit = std::find(out.begin(), out.end(), fold(a.gold_translation)) != out.end();
    RecallCounts& c = a.subset == OovSubset::TInv ? r.t_inv : r.t_oov;
    ++c.total;
    ++r.overall.total;
    if (hit) {
      ++c.hits;
      ++r.overall.hits;
    }
  }
  return r;
}

// ---- frequency bins -------------------------------------------------------------------

std::size_t min_training_frequency(const Sentence& source, const corpus::FrequencyTable& counts) {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& w : source) m = std::min(m, counts.count(w));
  return source.empty() ? 0 : m;
}

std::array<std::size_t, 3> default_boundaries(const std::vector<Sentence>& sources, const corpus::FrequencyTable& counts) {
  std::vector<std::size_t> mins;
  for (const auto& s : sources) mins.push_back(min_training_frequency(s, counts));
  if (mins.empty()) return {0, 0, 0};
  std::sort(mins.begin(), mins.end());
  std::array<std::size_t, 3> b{};
  for (std::size_t q = 1; q <= 3; ++q) {
    // nearest rank: ceil(q/4 * n), 1-based
    const std::size_t rank = (q * mins.size() + 3) / 4;
    b[q - 1] = mins[std::max<std::size_t>(rank, 1) - 1];
  }
  return b;
}

FrequencyBins frequency_analysis(const std::vector<Sentence>& outputs, const std::vector<std::vector<Sentence>>& references,
                                 const std::vector<Sentence>& sources, const corpus::FrequencyTable& training_counts,
                                 const std::array<std::size_t, 3>& boundaries) {
  if (outputs.size() != references.size() || outputs.size() != sources.size()) {
    throw Error(ErrorCode::LengthMismatch, "outputs, references and sources differ in length");
  }
  if (!(boundaries[0] <= boundaries[1] && boundaries[1] <= boundaries[2])) {
    throw Error(ErrorCode::InvalidArgument, "bin boundaries must be non-decreasing");
  }
  FrequencyBins fb;
  fb.boundaries = boundaries;
  for (std::size_t s = 0; s < outputs.size(); ++s) {
    const std::size_t m = min_training_frequency(sources[s], training_counts);
    std::size_t bin = 0;
    while (bin < 3 && m > boundaries[bin]) ++bin;
    fb.assignment.push_back(bin);
    const auto out = unigram_counts(folded(outputs[s]));
    std::size_t best_hits = 0, best_len = 0;
    bool first = true;
    for (const auto& ref_raw : references[s]) {
      const Sentence ref = folded(ref_raw);
      std::size_t hits = 0;
      for (const auto& [w, c] : unigram_counts(ref)) {
        auto it = out.find(w);
        if (it != out.end()) hits += std::min(c, it->second);
      }
      if (first || hits > best_hits) {
        best_hits = hits;
        best_len = ref.size();
        first = false;
      }
    }
    FrequencyBin& b = fb.bins[bin];
    ++b.sentences;
    b.hits += best_hits;
    b.reference_words += best_len;
  }
  return fb;
}

std::string format_bleu(const BleuReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "BLEU\t" << r.bleu * 100.0 << '\n';
  out << "bleu=" << r.bleu << '\n';
  for (std::size_t n = 0; n < 4; ++n) out << "p" << n + 1 << '=' << r.precisions[n] << '\n';
  out << "bp=" << r.brevity_penalty << '\n';
  out << "hyp_len=" << r.hypothesis_length << '\n';
  out << "ref_len=" << r.reference_length << '\n';
  return out.str();
}

std::string format_recall(const RecallReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "subset\thits\ttotal\trecall\n";
  out << "T-INV\t" << r.t_inv.hits << '\t' << r.t_inv.total << '\t' << r.t_inv.recall() << '\n';
  out << "T-OOV\t" << r.t_oov.hits << '\t' << r.t_oov.total << '\t' << r.t_oov.recall() << '\n';
  out << "recall_t_inv=" << r.t_inv.recall() << '\n';
  out << "recall_t_oov=" << r.t_oov.recall() << '\n';
  out << "recall_all=" << r.overall.recall() << '\n';
  return out.str();
}

}  // namespace mnmt::eval
