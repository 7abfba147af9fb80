#include "mnmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mnmt/common.hpp"
#include "mnmt/optim.hpp"

namespace mnmt::nmt {

std::vector<EncodedPair> encode_corpus(const corpus::ParallelCorpus& corpus, const corpus::Vocabulary& source_vocab,
                                       const corpus::Vocabulary& target_vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs()) {
    out.push_back(EncodedPair{corpus::encode(p.source, source_vocab), corpus::encode(p.target, target_vocab)});
  }
  return out;
}

CorpusLoss accumulate_gradients(const num::ParameterSet& params, std::span<const std::size_t> items, std::size_t shards,
                                std::size_t threads, const ItemLoss& item_loss, num::Gradients& out) {
  shards = std::max<std::size_t>(1, std::min(shards, items.size()));
  std::vector<num::Gradients> shard_grads(shards, num::Gradients(params));
  std::vector<CorpusLoss> shard_loss(shards);
  const std::size_t per = (items.size() + shards - 1) / shards;
  parallel_for(shards, threads == 0 ? default_threads() : threads, [&](std::size_t s) {
    const std::size_t begin = s * per, end = std::min(items.size(), begin + per);
    for (std::size_t k = begin; k < end; ++k) {
      num::Tape tape;
      auto built = item_loss(tape, items[k]);
      if (!built) continue;
      auto [loss, tokens] = *built;
      tape.backward(loss);
      tape.accumulate(params, shard_grads[s]);
      shard_loss[s].nats += loss.value()[0];
      shard_loss[s].tokens += tokens;
    }
  });
  CorpusLoss total;
  for (std::size_t s = 0; s < shards; ++s) {
    out.add(shard_grads[s]);
    total.nats += shard_loss[s].nats;
    total.tokens += shard_loss[s].tokens;
  }
  return total;
}

CorpusLoss corpus_loss(const Model& model, std::span<const EncodedPair> pairs, std::size_t threads) {
  std::vector<CorpusLoss> per(pairs.size());
  parallel_for(pairs.size(), threads == 0 ? default_threads() : threads, [&](std::size_t i) {
    num::Tape tape(false);
    per[i].nats = sentence_loss(tape, model, pairs[i].source, pairs[i].target).value()[0];
    per[i].tokens = pairs[i].target.size() + 1;
  });
  CorpusLoss total;
  for (const auto& l : per) {
    total.nats += l.nats;
    total.tokens += l.tokens;
  }
  return total;
}

TrainResult train_nmt(std::span<const EncodedPair> train, std::span<const EncodedPair> dev, const ModelConfig& model_config,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train.empty()) throw Error(ErrorCode::EmptyCorpus, "no training pairs");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  TrainResult result{Model(model_config, config.seed), {}};
  Model& model = result.model;
  num::AdaDelta optimizer(model.params(), config.rho, config.epsilon);
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!train[i].source.empty() && train[i].source.size() <= config.max_length &&
        train[i].target.size() <= config.max_length) {
      order.push_back(i);
    }
  }
  if (order.empty()) throw Error(ErrorCode::EmptyCorpus, "every training pair exceeds max_length");

  const ItemLoss item_loss = [&](num::Tape& tape, std::size_t i) -> std::optional<std::pair<num::Var, std::size_t>> {
    return std::pair{sentence_loss(tape, model, train[i].source, train[i].target), train[i].target.size() + 1};
  };

  std::size_t updates = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    CorpusLoss epoch_loss;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(b, std::min(config.batch_size, order.size() - b));
      num::Gradients grads(model.params());
      CorpusLoss batch_loss;
      try {
        batch_loss = accumulate_gradients(model.params(), batch, config.shards, config.threads, item_loss, grads);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteValue || e.code() == ErrorCode::NonFiniteGradient) {
          throw Error(ErrorCode::Divergence, std::string("training diverged: ") + e.what());
        }
        throw;
      }
      if (!std::isfinite(batch_loss.nats)) throw Error(ErrorCode::Divergence, "non-finite training loss");
      grads.scale(1.0 / static_cast<double>(batch_loss.tokens));
      num::clip_global_norm(grads, config.clip_norm);
      optimizer.step(model.params(), grads);
      ++updates;
      epoch_loss.nats += batch_loss.nats;
      epoch_loss.tokens += batch_loss.tokens;
    }
    EpochReport report;
    report.epoch = epoch;
    report.train_loss = epoch_loss.per_token();
    report.updates = updates;
    if (!dev.empty()) report.dev_perplexity = std::exp(corpus_loss(model, dev, config.threads).per_token());
    result.history.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  return result;
}

}  // namespace mnmt::nmt
