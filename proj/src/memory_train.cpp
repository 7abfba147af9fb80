#include "mnmt/memory_train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mnmt/common.hpp"
#include "mnmt/train.hpp"

namespace mnmt::memory {

using num::Tape;
using num::Var;

std::size_t MemoryExample::trainable_steps() const {
  return static_cast<std::size_t>(std::count_if(gold.begin(), gold.end(), [](const auto& g) { return g.has_value(); }));
}

MemoryExample prepare_example(const nmt::Model& model, const corpus::SentencePair& pair,
                              const corpus::Vocabulary& source_vocab, const corpus::Vocabulary& target_vocab,
                              const GlobalMemory& global) {
  const corpus::Ids src = corpus::encode(pair.source, source_vocab);
  const corpus::Ids tgt = corpus::encode(pair.target, target_vocab);
  Tape t(false);
  const nmt::EncoderGraph enc = nmt::encode_graph(t, model, src);
  MemoryExample ex;
  ex.local = build_local_memory(pair.source, enc.annotations.value(), global, target_vocab);
  Var state = enc.initial_state;
  int prev = corpus::kBos;
  for (int gold_id : tgt) {
    ex.prev_states.push_back(state.value());
    ex.prev_tokens.push_back(prev);
    if (gold_id != corpus::kUnk) {
      ex.gold.push_back(ex.local.index_of(gold_id));
    } else {
      ex.gold.push_back(std::nullopt);
    }
    state = nmt::step_graph(t, model, prev, state, enc).state;
    prev = gold_id;
  }
  return ex;
}

std::vector<MemoryExample> prepare_examples(const nmt::Model& model, const corpus::ParallelCorpus& corpus,
                                            const corpus::Vocabulary& source_vocab,
                                            const corpus::Vocabulary& target_vocab, const GlobalMemory& global,
                                            std::size_t threads) {
  std::vector<MemoryExample> out(corpus.size());
  parallel_for(corpus.size(), threads == 0 ? default_threads() : threads, [&](std::size_t i) {
    out[i] = prepare_example(model, corpus.pairs()[i], source_vocab, target_vocab, global);
  });
  return out;
}

std::optional<std::pair<Var, std::size_t>> memory_example_loss(Tape& t, const MemoryAttention& attention,
                                                               const nmt::Model& model, const MemoryExample& ex) {
  if (ex.trainable_steps() == 0) return std::nullopt;
  t.freeze(model.params());
  const Var keys = memory_keys_graph(t, attention, model, ex.local);
  const Var emb = t.param(model.params(), model.tgt_embedding);
  std::vector<Var> losses;
  for (std::size_t i = 0; i < ex.gold.size(); ++i) {
    if (!ex.gold[i]) continue;
    const Var y = num::row(emb, static_cast<std::size_t>(ex.prev_tokens[i]));
    const Var scores = memory_scores_graph(t, attention, keys, t.constant_ref(ex.prev_states[i]), y);
    losses.push_back(num::cross_entropy(scores, *ex.gold[i]));
  }
  return std::pair{num::add_n(losses), losses.size()};
}

MemoryCrossEntropy memory_cross_entropy(const MemoryAttention& attention, const nmt::Model& model,
                                        std::span<const MemoryExample> examples, std::size_t threads) {
  std::vector<MemoryCrossEntropy> per(examples.size());
  parallel_for(examples.size(), threads == 0 ? default_threads() : threads, [&](std::size_t i) {
    Tape t(false);
    if (auto built = memory_example_loss(t, attention, model, examples[i])) {
      per[i].nats = built->first.value()[0];
      per[i].steps = built->second;
    }
  });
  MemoryCrossEntropy total;
  for (const auto& p : per) {
    total.nats += p.nats;
    total.steps += p.steps;
  }
  return total;
}

MemoryTrainer::MemoryTrainer(const nmt::Model& model, MemoryAttention initial, const MemoryTrainConfig& config)
    : model_(&model),
      attention_(std::move(initial)),
      config_(config),
      optimizer_(attention_.params(), config.rho, config.epsilon),
      rng_(config.seed ^ 0x3e3e3eULL) {}

MemoryEpochReport MemoryTrainer::run_epoch(std::span<const MemoryExample> train, std::span<const MemoryExample> dev) {
  MemoryEpochReport report;
  report.epoch = ++epoch_;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < train.size(); ++i) {
    report.trained_steps += train[i].trainable_steps();
    report.skipped_steps += train[i].gold.size() - train[i].trainable_steps();
    if (train[i].trainable_steps() > 0) order.push_back(i);
  }
  std::shuffle(order.begin(), order.end(), rng_);
  const nmt::ItemLoss item_loss = [&](Tape& t, std::size_t i) { return memory_example_loss(t, attention_, *model_, train[i]); };
  nmt::CorpusLoss epoch_loss;
  const std::size_t batch = std::max<std::size_t>(1, config_.batch_size);
  for (std::size_t b = 0; b < order.size(); b += batch) {
    const auto items = std::span<const std::size_t>(order).subspan(b, std::min(batch, order.size() - b));
    num::Gradients grads(attention_.params());
    const auto loss = nmt::accumulate_gradients(attention_.params(), items, config_.shards, config_.threads, item_loss, grads);
    if (loss.tokens == 0) continue;
    if (!std::isfinite(loss.nats)) throw Error(ErrorCode::Divergence, "non-finite memory training loss");
    grads.scale(1.0 / static_cast<double>(loss.tokens));
    num::clip_global_norm(grads, config_.clip_norm);
    optimizer_.step(attention_.params(), grads);
    epoch_loss.nats += loss.nats;
    epoch_loss.tokens += loss.tokens;
  }
  report.train_ce = epoch_loss.per_token();
  if (!dev.empty()) report.dev_ce = memory_cross_entropy(attention_, *model_, dev, config_.threads).per_step();
  return report;
}

MemoryTrainResult train_memory_attention(const corpus::ParallelCorpus& train, const corpus::ParallelCorpus& dev,
                                         const nmt::Model& model, const corpus::Vocabulary& source_vocab,
                                         const corpus::Vocabulary& target_vocab, const GlobalMemory& global,
                                         const MemoryVariant& variant, const MemoryTrainConfig& config,
                                         const MemoryEpochCallback& on_epoch) {
  const auto train_ex = prepare_examples(model, train, source_vocab, target_vocab, global, config.threads);
  const auto dev_ex = prepare_examples(model, dev, source_vocab, target_vocab, global, config.threads);
  const std::size_t trainable = std::accumulate(train_ex.begin(), train_ex.end(), std::size_t{0},
                                                [](std::size_t n, const MemoryExample& e) { return n + e.trainable_steps(); });
  if (trainable == 0) {
    throw Error(ErrorCode::NoTrainableSteps, "no reference word of the training corpus is in its local memory");
  }
  const auto& mc = model.config();
  MemoryTrainer trainer(model, MemoryAttention(variant, mc.hidden_dim, mc.embed_dim, config.attention_dim, config.seed),
                        config);
  MemoryTrainResult result{trainer.attention(), {}, 0};
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto report = trainer.run_epoch(train_ex, dev_ex);
    result.history.push_back(report);
    if (on_epoch) on_epoch(report);
    const double score = dev_ex.empty() ? report.train_ce : report.dev_ce;
    if (score < best) {
      best = score;
      since_best = 0;
      result.attention = trainer.attention();
      result.best_epoch = report.epoch;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace mnmt::memory
