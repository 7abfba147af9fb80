#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnmt/aligner.hpp"
#include "mnmt/beam.hpp"
#include "mnmt/corpus.hpp"
#include "mnmt/model.hpp"

namespace mnmt::memory {

// u_jl = (source word x_j, target word y_jl) with both dictionary conditionals.
struct GlobalElement {
  std::string source;
  std::string target;
  double p_target_given_source = 0.0;
  double p_source_given_target = 0.0;
};

// Static word-pair store, read-only once built.
class GlobalMemory {
 public:
  GlobalMemory() = default;
  explicit GlobalMemory(std::vector<GlobalElement> elements);

  const std::vector<GlobalElement>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  bool empty() const noexcept { return elements_.empty(); }
  // Elements whose source is `source`, best p(y|x) first.
  std::span<const GlobalElement> lookup(const std::string& source) const;

  // Tab-separated "x  y  p(y|x)  p(x|y)".
  void save(const std::filesystem::path& path, const std::string& header_line) const;
  static GlobalMemory load(const std::filesystem::path& path);

 private:
  std::vector<GlobalElement> elements_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> ranges_;
};

// Keeps at most k targets per source word (by p(t|s)) and copies them into memory.
GlobalMemory build_global_memory(const align::TranslationDictionary& dict, std::size_t k);

// One source occurrence contributing to a merged element.
struct Occurrence {
  std::size_t position = 0;
  double raw_weight = 0.0;  // p(x_j | y~_k)
  double weight = 0.0;      // renormalised over the element's occurrences
};

// Merged element u_k = (y~_k, h~_k).
struct LocalElement {
  int target_id = corpus::kUnk;
  std::string target;
  num::Tensor summary;  // h~_k, dimension 2H
  std::vector<Occurrence> occurrences;
};

class LocalMemory {
 public:
  std::size_t size() const noexcept { return elements_.size(); }
  bool empty() const noexcept { return elements_.empty(); }
  const std::vector<LocalElement>& elements() const noexcept { return elements_; }
  const LocalElement& operator[](std::size_t k) const { return elements_[k]; }
  std::optional<std::size_t> index_of(int target_id) const;
  bool contains_target(int target_id) const { return index_of(target_id).has_value(); }

  // Adds occurrence (target, h_position) with raw weight and re-merges that element.
  void add_occurrence(int target_id, const std::string& target, std::size_t position, double raw_weight,
                      const num::Tensor& annotations);

  // Stacked summaries, [K x 2H].
  num::Tensor summaries() const;

 private:
  std::vector<LocalElement> elements_;
  std::unordered_map<int, std::size_t> index_;
};

// Selects global elements whose source word occurs in the sentence, instantiates one
// element per occurrence and merges per target word. Positions flagged in `skip`
// are left out; targets outside the target vocabulary are dropped.
LocalMemory build_local_memory(const corpus::Sentence& source, const num::Tensor& annotations,
                               const GlobalMemory& global, const corpus::Vocabulary& target_vocab,
                               const std::vector<bool>& skip = {});

// Attending factors {s, y_prev} and attended factors {u^y, u^xy}.
struct MemoryVariant {
  bool attend_prev_word = true;  // "sy" vs "s"
  bool attend_source = true;     // "xy" vs "y"

  static MemoryVariant parse(const std::string& name);  // s_y | s_xy | sy_y | sy_xy
  std::string name() const;
  friend bool operator==(const MemoryVariant&, const MemoryVariant&) = default;
};

// theta^m = {v, W_s, W_u, W_y}; W_y exists only for variants attending y_prev.
class MemoryAttention {
 public:
  MemoryAttention(MemoryVariant variant, std::size_t hidden_dim, std::size_t embed_dim, std::size_t attention_dim,
                  std::uint64_t seed, double init_scale = 0.08);
  // embed_dim is the frozen model's target embedding width.
  static MemoryAttention from_parameters(num::ParameterSet params, std::size_t embed_dim);

  const MemoryVariant& variant() const noexcept { return variant_; }
  num::ParameterSet& params() noexcept { return params_; }
  const num::ParameterSet& params() const noexcept { return params_; }
  std::size_t key_dim() const { return params_[w_u].value.cols(); }

  std::size_t v = 0, w_s = 0, w_u = 0;
  std::optional<std::size_t> w_y;

 private:
  MemoryAttention() = default;
  MemoryVariant variant_;
  num::ParameterSet params_;
};

// u_k in vector form: [E_t(y~_k)] or [E_t(y~_k); h~_k].
num::Tensor element_vector(const nmt::Model& model, const LocalElement& element, const MemoryVariant& variant);

// e^m = v . tanh(W_s s_prev + W_u u_k + W_y y_prev); y_prev ignored when the variant has no W_y.
double memory_relevance(const MemoryAttention& attention, const num::Tensor& prev_state,
                        const num::Tensor& prev_embedding, const num::Tensor& element);

// softmax over scores; throws EmptyMemory for K = 0.
num::Tensor memory_attention(std::span<const double> scores);

// p~(w) = beta * alpha_k(w) + (1 - beta) * p(w); p unchanged for an empty memory.
num::Tensor combine_posteriors(std::span<const double> posterior, std::span<const double> alpha,
                               const LocalMemory& local, double beta);

// sum_j alpha_j p(y | x_j) renormalised; uniform when no source word has an entry.
num::Tensor lexical_posterior(std::span<const double> model_attention, const align::TranslationDictionary& dict,
                              const corpus::Sentence& source, const corpus::Vocabulary& target_vocab);

// ---- graph form (training) --------------------------------------------------------

// U * W_u^T for the whole local memory, [K x A].
num::Var memory_keys_graph(num::Tape& tape, const MemoryAttention& attention, const nmt::Model& model,
                           const LocalMemory& local);
// Scores e^m_i. over the local memory.
num::Var memory_scores_graph(num::Tape& tape, const MemoryAttention& attention, num::Var keys, num::Var prev_state,
                             num::Var prev_embedding);

// ---- decoding hooks ----------------------------------------------------------------

// Posterior hook mixing memory attention into the model posterior for one sentence.
class MemoryHook {
 public:
  MemoryHook(const nmt::Model& model, const MemoryAttention& attention, LocalMemory local, double beta);

  void operator()(const nmt::StepContext& ctx, std::span<double> posterior) const;
  // alpha^m for a given decoder context (empty when the local memory is empty).
  num::Tensor attention_weights(const num::Tensor& prev_state, const num::Tensor& prev_embedding) const;
  const LocalMemory& local() const noexcept { return local_; }

 private:
  const MemoryAttention* attention_;
  LocalMemory local_;
  double beta_;
  num::Tensor keys_;  // [K x A]
};

// NMT-L comparator: mixes lexical_posterior into the model posterior with weight beta.
class LexicalHook {
 public:
  LexicalHook(const align::TranslationDictionary& dict, corpus::Sentence source, const corpus::Vocabulary& target_vocab,
              double beta);
  void operator()(const nmt::StepContext& ctx, std::span<double> posterior) const;

 private:
  const align::TranslationDictionary* dict_;
  corpus::Sentence source_;
  const corpus::Vocabulary* target_vocab_;
  double beta_;
};

void check_beta(double beta);

}  // namespace mnmt::memory
