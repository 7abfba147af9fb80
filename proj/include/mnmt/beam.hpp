#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/model.hpp"
#include "mnmt/redirection.hpp"

namespace mnmt::nmt {

// What a posterior hook sees at decoding step i (all values for the hypothesis being extended).
struct StepContext {
  std::size_t step = 0;
  int prev_token = corpus::kBos;
  const num::Tensor* prev_state = nullptr;      // s_{i-1}
  const num::Tensor* prev_embedding = nullptr;  // target embedding of y_{i-1}
  const num::Tensor* model_attention = nullptr; // alpha_i over source positions
};

// Rewrites p(y_i) in place into the distribution used for search.
using PosteriorHook = std::function<void(const StepContext&, std::span<double> posterior)>;

struct Hypothesis {
  corpus::Ids tokens;  // emitted ids, EOS included when finished
  double log_prob = 0.0;
  num::Tensor state;
  bool finished = false;
  oov::RedirectionRecord redirections;

  double normalized_score() const;
};

struct BeamConfig {
  std::size_t beam = 5;
  std::size_t max_length = 0;  // 0: 2 * source length + 5
};

// Length-bounded beam search over (possibly hooked) posteriors. Returns every
// completed hypothesis ranked by log-prob / length, ties to the lower id sequence.
std::vector<Hypothesis> beam_search(const Model& model, std::span<const int> source, const BeamConfig& config,
                                    const PosteriorHook& hook = {});

// Token ids of the best hypothesis with the trailing EOS removed.
corpus::Ids best_tokens(const std::vector<Hypothesis>& ranked);

}  // namespace mnmt::nmt
