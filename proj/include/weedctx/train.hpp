#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "weedctx/dataprep.hpp"
#include "weedctx/net.hpp"

namespace weedctx {

enum class Precision { F32, F64 };

struct TrainingConfig {
  double learning_rate = 0.01;
  double decay = 1e-3;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;

  void validate() const;
  /// lr0 / (1 + decay * epoch), epoch counted from 0.
  double lr_at(int epoch) const { return learning_rate / (1.0 + decay * epoch); }
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double lr = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct History {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; first epoch reaching the highest val accuracy

  double best_val_acc() const;
  friend bool operator==(const History&, const History&) = default;
};

/// Pixels scaled to [0, 1] as an N x H x W x 3 tensor.
template <typename T>
Tensor<T> to_batch(std::span<const Sample> samples, std::span<const std::size_t> indices);

template <typename T>
Tensor<T> to_batch(std::span<const Sample> samples);

/// Probabilities for every sample, evaluated in chunks of batch_size.
template <typename T>
std::vector<T> predict(const ModelParams<T>& params, std::span<const Sample> samples, int batch_size = 32);

template <typename T>
struct TrainResult {
  ModelParams<T> best;
  History history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minibatch SGD with a per-epoch seeded shuffle and decayed learning rate.
/// Returns the parameters of the epoch with the highest validation accuracy
/// (threshold 0.5). Throws if the loss or parameters become non-finite.
template <typename T>
TrainResult<T> train(const NetworkSpec& spec, std::span<const Sample> train_set, std::span<const Sample> val_set,
                     const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// Same as train() but starting from given parameters.
template <typename T>
TrainResult<T> train_from(ModelParams<T> params, std::span<const Sample> train_set,
                          std::span<const Sample> val_set, const TrainingConfig& config,
                          const EpochCallback& on_epoch = {});

}  // namespace weedctx
