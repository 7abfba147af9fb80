#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mnmt/corpus.hpp"
#include "mnmt/model.hpp"

namespace mnmt::nmt {

struct EncodedPair {
  corpus::Ids source;
  corpus::Ids target;
};

std::vector<EncodedPair> encode_corpus(const corpus::ParallelCorpus& corpus, const corpus::Vocabulary& source_vocab,
                                       const corpus::Vocabulary& target_vocab);

struct TrainConfig {
  std::size_t batch_size = 80;
  std::size_t epochs = 10;
  double clip_norm = 5.0;  // global-norm clipping; <= 0 disables
  double rho = 0.95;
  double epsilon = 1e-6;
  std::uint64_t seed = 1;
  std::size_t shards = 4;   // fixed reduction layout, independent of threads
  std::size_t threads = 0;  // 0: hardware concurrency
  std::size_t max_length = 80;
};

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;      // nats per target token (incl. EOS)
  double dev_perplexity = 0.0;  // 0 when no dev set
  std::size_t updates = 0;
};

using EpochCallback = std::function<void(const EpochReport&)>;

struct TrainResult {
  Model model;
  std::vector<EpochReport> history;
};

// Teacher-forced cross-entropy training with AdaDelta. Throws Divergence on a non-finite loss.
TrainResult train_nmt(std::span<const EncodedPair> train, std::span<const EncodedPair> dev, const ModelConfig& model_config,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

struct CorpusLoss {
  double nats = 0.0;
  std::size_t tokens = 0;
  double per_token() const { return tokens == 0 ? 0.0 : nats / static_cast<double>(tokens); }
};

CorpusLoss corpus_loss(const Model& model, std::span<const EncodedPair> pairs, std::size_t threads = 0);

// Builds the loss of one item on a fresh tape; returns (loss, token count).
using ItemLoss = std::function<std::optional<std::pair<num::Var, std::size_t>>(num::Tape&, std::size_t item)>;

// Sums gradients of `params` over items, split into `shards` contiguous chunks
// that are reduced in chunk order, so results do not depend on thread count.
CorpusLoss accumulate_gradients(const num::ParameterSet& params, std::span<const std::size_t> items, std::size_t shards,
                                std::size_t threads, const ItemLoss& item_loss, num::Gradients& out);

}  // namespace mnmt::nmt
