#include "mnmt/memory.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mnmt/common.hpp"

namespace mnmt::memory {

using num::Shape;
using num::Tape;
using num::Tensor;
using num::Var;

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw Error(ErrorCode::InvalidBeta, "interpolation factor must lie in [0,1], got " + std::to_string(beta));
  }
}

// ---- GlobalMemory ---------------------------------------------------------------------

GlobalMemory::GlobalMemory(std::vector<GlobalElement> elements) : elements_(std::move(elements)) {
  std::stable_sort(elements_.begin(), elements_.end(), [](const GlobalElement& a, const GlobalElement& b) {
    if (a.source != b.source) return a.source < b.source;
    if (a.p_target_given_source != b.p_target_given_source) return a.p_target_given_source > b.p_target_given_source;
    return a.target < b.target;
  });
  for (std::size_t i = 0; i < elements_.size();) {
    std::size_t j = i;
    while (j < elements_.size() && elements_[j].source == elements_[i].source) ++j;
    ranges_.emplace(elements_[i].source, std::pair{i, j - i});
    i = j;
  }
}

std::span<const GlobalElement> GlobalMemory::lookup(const std::string& source) const {
  auto it = ranges_.find(source);
  if (it == ranges_.end()) return {};
  return std::span<const GlobalElement>(elements_).subspan(it->second.first, it->second.second);
}

void GlobalMemory::save(const std::filesystem::path& path, const std::string& header_line) const {
  std::vector<align::DictEntry> entries;
  for (const auto& e : elements_) {
    entries.push_back(align::DictEntry{e.source, e.target, e.p_target_given_source, e.p_source_given_target});
  }
  align::TranslationDictionary(std::move(entries)).save(path, header_line);
}

GlobalMemory GlobalMemory::load(const std::filesystem::path& path) {
  const auto dict = align::TranslationDictionary::load(path);
  std::vector<GlobalElement> elements;
  for (const auto& e : dict.entries()) {
    elements.push_back(GlobalElement{e.source, e.target, e.p_target_given_source, e.p_source_given_target});
  }
  return GlobalMemory(std::move(elements));
}

GlobalMemory build_global_memory(const align::TranslationDictionary& dict, std::size_t k) {
  const auto filtered = align::filter_top_k(dict, k);
  std::vector<GlobalElement> elements;
  for (const auto& e : filtered.entries()) {
    elements.push_back(GlobalElement{e.source, e.target, e.p_target_given_source, e.p_source_given_target});
  }
  return GlobalMemory(std::move(elements));
}

// ---- LocalMemory ----------------------------------------------------------------------

std::optional<std::size_t> LocalMemory::index_of(int target_id) const {
  auto it = index_.find(target_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void LocalMemory::add_occurrence(int target_id, const std::string& target, std::size_t position, double raw_weight,
                                 const Tensor& annotations) {
  if (position >= annotations.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "occurrence position outside the annotation matrix");
  }
  auto [it, inserted] = index_.try_emplace(target_id, elements_.size());
  if (inserted) elements_.push_back(LocalElement{target_id, target, Tensor(Shape{annotations.cols()}), {}});
  LocalElement& el = elements_[it->second];
  el.occurrences.push_back(Occurrence{position, raw_weight, 0.0});
  double total = 0.0;
  for (const auto& o : el.occurrences) total += o.raw_weight;
  el.summary.fill(0.0);
  for (auto& o : el.occurrences) {
    o.weight = total > 0.0 ? o.raw_weight / total : 1.0 / static_cast<double>(el.occurrences.size());
    const auto h = annotations.row(o.position);
    for (std::size_t d = 0; d < h.size(); ++d) el.summary[d] += o.weight * h[d];
  }
}

Tensor LocalMemory::summaries() const {
  if (elements_.empty()) return Tensor();
  const std::size_t dim = elements_.front().summary.size();
  Tensor out(Shape{elements_.size(), dim});
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    std::copy(elements_[k].summary.values().begin(), elements_[k].summary.values().end(), out.row(k).begin());
  }
  return out;
}

LocalMemory build_local_memory(const corpus::Sentence& source, const Tensor& annotations, const GlobalMemory& global,
                               const corpus::Vocabulary& target_vocab, const std::vector<bool>& skip) {
  if (annotations.rows() != source.size()) {
    throw Error(ErrorCode::ShapeMismatch, "annotations do not match the source length");
  }
  LocalMemory local;
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (j < skip.size() && skip[j]) continue;
    for (const auto& e : global.lookup(source[j])) {
      if (!target_vocab.contains(e.target)) continue;
      local.add_occurrence(target_vocab.id(e.target), e.target, j, e.p_source_given_target, annotations);
    }
  }
  return local;
}

// ---- MemoryVariant / MemoryAttention -------------------------------------------------

MemoryVariant MemoryVariant::parse(const std::string& name) {
  if (name == "s_y") return {false, false};
  if (name == "s_xy") return {false, true};
  if (name == "sy_y") return {true, false};
  if (name == "sy_xy") return {true, true};
  throw Error(ErrorCode::InvalidArgument, "unknown memory variant '" + name + "' (s_y|s_xy|sy_y|sy_xy)");
}

std::string MemoryVariant::name() const {
  return std::string(attend_prev_word ? "sy" : "s") + (attend_source ? "_xy" : "_y");
}

MemoryAttention::MemoryAttention(MemoryVariant variant, std::size_t hidden_dim, std::size_t embed_dim,
                                 std::size_t attention_dim, std::uint64_t seed, double init_scale)
    : variant_(variant) {
  std::mt19937_64 rng(seed);
  const std::size_t key = embed_dim + (variant.attend_source ? 2 * hidden_dim : 0);
  v = params_.add_uniform("v", Shape{attention_dim}, init_scale, rng);
  w_s = params_.add_uniform("w_s", Shape{attention_dim, hidden_dim}, init_scale, rng);
  w_u = params_.add_uniform("w_u", Shape{attention_dim, key}, init_scale, rng);
  if (variant.attend_prev_word) w_y = params_.add_uniform("w_y", Shape{attention_dim, embed_dim}, init_scale, rng);
}

MemoryAttention MemoryAttention::from_parameters(num::ParameterSet params, std::size_t embed_dim) {
  MemoryAttention m;
  m.params_ = std::move(params);
  m.v = m.params_.index_of("v");
  m.w_s = m.params_.index_of("w_s");
  m.w_u = m.params_.index_of("w_u");
  if (m.params_.contains("w_y")) m.w_y = m.params_.index_of("w_y");
  const std::size_t hidden = m.params_[m.w_s].value.cols();
  const std::size_t key = m.params_[m.w_u].value.cols();
  if (key != embed_dim && key != embed_dim + 2 * hidden) {
    throw Error(ErrorCode::Format, "memory attention w_u width matches neither u^y nor u^xy");
  }
  m.variant_.attend_prev_word = m.w_y.has_value();
  m.variant_.attend_source = key == embed_dim + 2 * hidden;
  return m;
}

Tensor element_vector(const nmt::Model& model, const LocalElement& element, const MemoryVariant& variant) {
  const auto emb = model.params()[model.tgt_embedding].value.row(static_cast<std::size_t>(element.target_id));
  std::vector<double> u(emb.begin(), emb.end());
  if (variant.attend_source) u.insert(u.end(), element.summary.values().begin(), element.summary.values().end());
  return Tensor::vector(std::move(u));
}

double memory_relevance(const MemoryAttention& attention, const Tensor& prev_state, const Tensor& prev_embedding,
                        const Tensor& element) {
  Tape t(false);
  const auto& ps = attention.params();
  std::vector<Var> terms{num::matvec(t.param(ps, attention.w_s), t.constant_ref(prev_state)),
                         num::matvec(t.param(ps, attention.w_u), t.constant_ref(element))};
  if (attention.w_y) terms.push_back(num::matvec(t.param(ps, *attention.w_y), t.constant_ref(prev_embedding)));
  return num::dot(t.param(ps, attention.v), num::tanh(num::add_n(terms))).value()[0];
}

Tensor memory_attention(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyMemory, "memory attention over an empty local memory");
  return num::softmax_values(scores);
}

Tensor combine_posteriors(std::span<const double> posterior, std::span<const double> alpha, const LocalMemory& local,
                          double beta) {
  check_beta(beta);
  Tensor out = Tensor::vector(std::vector<double>(posterior.begin(), posterior.end()));
  if (local.empty()) return out;
  if (alpha.size() != local.size()) {
    throw Error(ErrorCode::ShapeMismatch, "memory attention size does not match the local memory");
  }
  for (double& p : out.values()) p *= (1.0 - beta);
  for (std::size_t k = 0; k < local.size(); ++k) {
    const auto w = static_cast<std::size_t>(local[k].target_id);
    if (w >= out.size()) throw Error(ErrorCode::ShapeMismatch, "memory target outside the posterior");
    out[w] = beta * alpha[k] + (1.0 - beta) * posterior[w];
  }
  return out;
}

Tensor lexical_posterior(std::span<const double> model_attention, const align::TranslationDictionary& dict,
                         const corpus::Sentence& source, const corpus::Vocabulary& target_vocab) {
  if (model_attention.size() != source.size()) {
    throw Error(ErrorCode::ShapeMismatch, "attention length does not match the source length");
  }
  Tensor out(Shape{target_vocab.size()});
  double total = 0.0;
  for (std::size_t j = 0; j < source.size(); ++j) {
    for (const auto* e : dict.candidates(source[j])) {
      if (!target_vocab.contains(e->target)) continue;
      const double mass = model_attention[j] * e->p_target_given_source;
      out[static_cast<std::size_t>(target_vocab.id(e->target))] += mass;
      total += mass;
    }
  }
  if (total > 0.0) {
    for (double& p : out.values()) p /= total;
  } else {
    out.fill(1.0 / static_cast<double>(out.size()));
  }
  return out;
}

// ---- graph form -----------------------------------------------------------------------

Var memory_keys_graph(Tape& t, const MemoryAttention& attention, const nmt::Model& model, const LocalMemory& local) {
  if (local.empty()) throw Error(ErrorCode::EmptyMemory, "no memory elements to attend");
  const Var emb = t.param(model.params(), model.tgt_embedding);
  std::vector<Var> rows;
  rows.reserve(local.size());
  for (const auto& el : local.elements()) {
    const Var y = num::row(emb, static_cast<std::size_t>(el.target_id));
    rows.push_back(attention.variant().attend_source
                       ? num::concat(std::array<Var, 2>{y, t.constant_ref(el.summary)})
                       : y);
  }
  return num::matmul_nt(num::stack_rows(rows), t.param(attention.params(), attention.w_u));
}

Var memory_scores_graph(Tape& t, const MemoryAttention& attention, Var keys, Var prev_state, Var prev_embedding) {
  const auto& ps = attention.params();
  Var query = num::matvec(t.param(ps, attention.w_s), prev_state);
  if (attention.w_y) query = num::add(query, num::matvec(t.param(ps, *attention.w_y), prev_embedding));
  return num::matvec(num::tanh(num::add_row_bias(keys, query)), t.param(ps, attention.v));
}

// ---- hooks ------------------------------------------------------------------------------

MemoryHook::MemoryHook(const nmt::Model& model, const MemoryAttention& attention, LocalMemory local, double beta)
    : attention_(&attention), local_(std::move(local)), beta_(beta) {
  check_beta(beta);
  if (!local_.empty()) {
    Tape t(false);
    keys_ = memory_keys_graph(t, attention, model, local_).value();
  }
}

Tensor MemoryHook::attention_weights(const Tensor& prev_state, const Tensor& prev_embedding) const {
  if (local_.empty()) return Tensor();
  Tape t(false);
  const Var scores = memory_scores_graph(t, *attention_, t.constant_ref(keys_), t.constant_ref(prev_state),
                                         t.constant_ref(prev_embedding));
  return memory_attention(scores.value().values());
}

void MemoryHook::operator()(const nmt::StepContext& ctx, std::span<double> posterior) const {
  if (local_.empty()) return;
  const Tensor alpha = attention_weights(*ctx.prev_state, *ctx.prev_embedding);
  const Tensor mixed = combine_posteriors(posterior, alpha.values(), local_, beta_);
  std::copy(mixed.values().begin(), mixed.values().end(), posterior.begin());
}

LexicalHook::LexicalHook(const align::TranslationDictionary& dict, corpus::Sentence source,
                         const corpus::Vocabulary& target_vocab, double beta)
    : dict_(&dict), source_(std::move(source)), target_vocab_(&target_vocab), beta_(beta) {
  check_beta(beta);
}

void LexicalHook::operator()(const nmt::StepContext& ctx, std::span<double> posterior) const {
  if (beta_ == 0.0) return;
  const Tensor lex = lexical_posterior(ctx.model_attention->values(), *dict_, source_, *target_vocab_);
  for (std::size_t w = 0; w < posterior.size(); ++w) posterior[w] = beta_ * lex[w] + (1.0 - beta_) * posterior[w];
}

}  // namespace mnmt::memory
