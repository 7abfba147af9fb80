#include "mnmt/beam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnmt/common.hpp"

namespace mnmt::nmt {

using num::Tape;
using num::Var;

double Hypothesis::normalized_score() const {
  return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
}

namespace {

struct Live {
  corpus::Ids tokens;
  double log_prob;
  Var state;
};

struct Candidate {
  double log_prob;
  std::size_t parent;
  int token;
};

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.normalized_score(), sb = b.normalized_score();
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<Hypothesis> beam_search(const Model& model, std::span<const int> source, const BeamConfig& config,
                                    const PosteriorHook& hook) {
  if (config.beam == 0) throw Error(ErrorCode::InvalidArgument, "beam size must be positive");
  Tape tape(false);
  const EncoderGraph enc = encode_graph(tape, model, source);
  const std::size_t max_len = config.max_length != 0 ? config.max_length : 2 * source.size() + 5;
  const std::size_t V = model.config().target_vocab;

  std::vector<Live> live{Live{{}, 0.0, enc.initial_state}};
  std::vector<Hypothesis> finished;
  std::vector<double> posterior(V);
  std::vector<Candidate> candidates;

  for (std::size_t step = 0; step < max_len && !live.empty() && finished.size() < config.beam; ++step) {
    candidates.clear();
    std::vector<Var> next_states(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const int prev = live[h].tokens.empty() ? corpus::kBos : live[h].tokens.back();
      const StepGraph g = step_graph(tape, model, prev, live[h].state, enc);
      next_states[h] = g.state;
      const num::Tensor p = num::softmax_values(g.logits.value().values());
      std::copy(p.values().begin(), p.values().end(), posterior.begin());
      if (hook) {
        StepContext ctx;
        ctx.step = step;
        ctx.prev_token = prev;
        ctx.prev_state = &live[h].state.value();
        ctx.prev_embedding = &g.prev_embedding.value();
        ctx.model_attention = &g.attention.alpha.value();
        hook(ctx, posterior);
      }
      for (std::size_t w = 0; w < V; ++w) {
        if (w == static_cast<std::size_t>(corpus::kPad) || w == static_cast<std::size_t>(corpus::kBos)) continue;
        if (!(posterior[w] > 0.0)) continue;
        candidates.push_back(Candidate{live[h].log_prob + std::log(posterior[w]), h, static_cast<int>(w)});
      }
    }
    const std::size_t width = config.beam - finished.size();
    const auto cmp = [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), cmp);
    std::vector<Live> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = candidates[c];
      corpus::Ids tokens = live[cand.parent].tokens;
      tokens.push_back(cand.token);
      if (cand.token == corpus::kEos) {
        finished.push_back(Hypothesis{std::move(tokens), cand.log_prob, next_states[cand.parent].value(), true, {}});
      } else {
        next.push_back(Live{std::move(tokens), cand.log_prob, next_states[cand.parent]});
      }
    }
    live = std::move(next);
  }
  // Length bound reached: unfinished hypotheses compete as they are.
  if (finished.size() < config.beam) {
    for (auto& l : live) finished.push_back(Hypothesis{std::move(l.tokens), l.log_prob, l.state.value(), false, {}});
  }
  std::sort(finished.begin(), finished.end(), better_final);
  return finished;
}

corpus::Ids best_tokens(const std::vector<Hypothesis>& ranked) {
  if (ranked.empty()) return {};
  corpus::Ids out = ranked.front().tokens;
  if (!out.empty() && out.back() == corpus::kEos) out.pop_back();
  return out;
}

}  // namespace mnmt::nmt
