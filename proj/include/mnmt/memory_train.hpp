#pragma once

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mnmt/memory.hpp"
#include "mnmt/optim.hpp"

namespace mnmt::memory {

// Teacher-forced view of one training pair under the frozen model.
struct MemoryExample {
  LocalMemory local;
  std::vector<num::Tensor> prev_states;             // s_{i-1} for each reference word y_i
  std::vector<int> prev_tokens;                     // y_{i-1}
  std::vector<std::optional<std::size_t>> gold;     // k_i, or nothing when the step is skipped

  std::size_t trainable_steps() const;
};

// Steps whose reference word is UNK or absent from the local memory get no gold index.
MemoryExample prepare_example(const nmt::Model& model, const corpus::SentencePair& pair,
                              const corpus::Vocabulary& source_vocab, const corpus::Vocabulary& target_vocab,
                              const GlobalMemory& global);

std::vector<MemoryExample> prepare_examples(const nmt::Model& model, const corpus::ParallelCorpus& corpus,
                                            const corpus::Vocabulary& source_vocab,
                                            const corpus::Vocabulary& target_vocab, const GlobalMemory& global,
                                            std::size_t threads = 0);

// -sum_i log alpha^m_{i,k_i} over trainable steps; nothing when the example has none.
std::optional<std::pair<num::Var, std::size_t>> memory_example_loss(num::Tape& tape, const MemoryAttention& attention,
                                                                    const nmt::Model& model,
                                                                    const MemoryExample& example);

struct MemoryCrossEntropy {
  double nats = 0.0;
  std::size_t steps = 0;
  double per_step() const { return steps == 0 ? 0.0 : nats / static_cast<double>(steps); }
};

MemoryCrossEntropy memory_cross_entropy(const MemoryAttention& attention, const nmt::Model& model,
                                        std::span<const MemoryExample> examples, std::size_t threads = 0);

struct MemoryTrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 80;
  double rho = 0.95;
  double epsilon = 1e-6;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t attention_dim = 64;
  std::size_t shards = 4;
  std::size_t threads = 0;
  std::size_t patience = 2;  // epochs without dev improvement before stopping; 0 disables
};

struct MemoryEpochReport {
  std::size_t epoch = 0;
  double train_ce = 0.0;  // nats per trained step
  double dev_ce = 0.0;
  std::size_t trained_steps = 0;
  std::size_t skipped_steps = 0;
};

// AdaDelta over theta^m only; the neural model is never modified.
class MemoryTrainer {
 public:
  MemoryTrainer(const nmt::Model& model, MemoryAttention initial, const MemoryTrainConfig& config);

  MemoryEpochReport run_epoch(std::span<const MemoryExample> train, std::span<const MemoryExample> dev);
  const MemoryAttention& attention() const noexcept { return attention_; }

 private:
  const nmt::Model* model_;
  MemoryAttention attention_;
  MemoryTrainConfig config_;
  num::AdaDelta optimizer_;
  std::mt19937_64 rng_;
  std::size_t epoch_ = 0;
};

using MemoryEpochCallback = std::function<void(const MemoryEpochReport&)>;

struct MemoryTrainResult {
  MemoryAttention attention;  // parameters of the best dev epoch
  std::vector<MemoryEpochReport> history;
  std::size_t best_epoch = 0;
};

// Throws NoTrainableSteps when no training position has its reference word in memory.
MemoryTrainResult train_memory_attention(const corpus::ParallelCorpus& train, const corpus::ParallelCorpus& dev,
                                         const nmt::Model& model, const corpus::Vocabulary& source_vocab,
                                         const corpus::Vocabulary& target_vocab, const GlobalMemory& global,
                                         const MemoryVariant& variant, const MemoryTrainConfig& config,
                                         const MemoryEpochCallback& on_epoch = {});

}  // namespace mnmt::memory
